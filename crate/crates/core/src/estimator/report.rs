use serde::{Deserialize, Serialize};

/// Weighted face residuals of the u and w equations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceContribution {
    pub u: f64,
    pub w: f64,
}

impl FaceContribution {
    pub fn total(&self) -> f64 {
        self.u + self.w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub mesh: u64,
    pub tau: f64,
    pub t: f64,
    /// `h_K^2 ||rho_i^K||^2` per element and equation.
    pub element_residual: Vec<[f64; 3]>,
    /// `h_K^2 ||eta_i^K||^2` per element and equation.
    pub element_data: Vec<[f64; 3]>,
    pub face_residual: Vec<FaceContribution>,
    /// `h_E ||eta_1^E||^2` per face.
    pub face_data: Vec<f64>,
    /// Per-element spatial indicator used for marking.
    pub marking: Vec<f64>,
    /// Per-element share of `gamma`.
    pub temporal_element: Vec<f64>,
    pub alpha: f64,
    pub alpha_parts: [f64; 3],
    pub theta: f64,
    pub gamma: f64,
    pub gamma_parts: [f64; 3],
    pub kappa: f64,
}

impl EstimatorReport {
    /// Contribution of this step to the accumulated squared estimate.
    pub fn step_total(&self) -> f64 {
        self.tau * (self.alpha + self.theta) + self.gamma + self.kappa
    }

    pub fn row(&self, step: usize) -> IndicatorRow {
        IndicatorRow {
            step,
            t: self.t,
            tau: self.tau,
            mesh: self.mesh,
            elements: self.marking.len(),
            alpha: self.alpha,
            alpha_u: self.alpha_parts[0],
            alpha_v: self.alpha_parts[1],
            alpha_w: self.alpha_parts[2],
            theta: self.theta,
            gamma: self.gamma,
            kappa: self.kappa,
        }
    }
}

/// One line of the per-step indicator CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    pub mesh: u64,
    pub elements: usize,
    pub alpha: f64,
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub alpha_w: f64,
    pub theta: f64,
    pub gamma: f64,
    pub kappa: f64,
}

/// Running sums over a trajectory. `total()` is the squared estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AccumulatedEstimate {
    pub initial: f64,
    pub spatial: f64,
    pub data: f64,
    pub temporal: f64,
    pub steps: usize,
}

impl AccumulatedEstimate {
    pub fn with_initial(initial: f64) -> Self {
        AccumulatedEstimate {
            initial,
            ..Default::default()
        }
    }

    pub fn add(&mut self, r: &EstimatorReport) {
        self.spatial += r.tau * r.alpha;
        self.data += r.tau * r.theta;
        self.temporal += r.gamma + r.kappa;
        self.steps += 1;
    }

    pub fn total(&self) -> f64 {
        self.initial + self.spatial + self.data + self.temporal
    }

    pub fn estimate(&self) -> f64 {
        self.total().sqrt()
    }
}

/// Ratio of estimate to error; `+inf` when the error vanishes.
pub fn effectivity(estimate: f64, error: f64) -> f64 {
    if error == 0.0 {
        f64::INFINITY
    } else {
        estimate / error
    }
}
