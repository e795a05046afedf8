//! Coefficients, reaction terms, parameter sets and initial data of the
//! tumour-invasion system
//!
//! ```text
//! u_t = div(d1 grad u) - div(chi(v) u grad v) + lambda u (1 - u - v)
//! v_t = rho v (1 - u - v) - eta v w
//! w_t = d2 lap w + alpha u (1 - w) - beta w
//! ```
//!
//! with zero-flux boundary conditions on the unit cube.

mod manufactured;

use std::fmt;
use std::sync::Arc;

pub use manufactured::{manufactured_case, ManufacturedCase};

use crate::error::{Error, Result};
use crate::fem::StateFields;
use crate::mesh::{Point, SimplicialMesh};

/// How coefficient-hook derivatives enter Newton linearisations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianMode {
    /// Use the derivatives declared by the hooks; fail if one is missing.
    #[default]
    Analytic,
    /// Central differences of the hook values wherever a derivative is missing.
    FiniteDifference,
}

/// Cell diffusion coefficient d1(u, v, w).
pub trait DiffusionCoefficient: Send + Sync + fmt::Debug {
    fn value(&self, u: f64, v: f64, w: f64) -> f64;

    /// Partial derivatives with respect to (u, v, w), if known.
    fn gradient(&self, _u: f64, _v: f64, _w: f64) -> Option<[f64; 3]> {
        None
    }

    /// `Some(c)` when the coefficient is the constant `c`.
    fn constant(&self) -> Option<f64> {
        None
    }
}

/// Haptotactic sensitivity chi(v).
pub trait Sensitivity: Send + Sync + fmt::Debug {
    fn value(&self, v: f64) -> f64;

    fn derivative(&self, _v: f64) -> Option<f64> {
        None
    }

    fn constant(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub f64);

impl DiffusionCoefficient for Constant {
    fn value(&self, _u: f64, _v: f64, _w: f64) -> f64 {
        self.0
    }
    fn gradient(&self, _u: f64, _v: f64, _w: f64) -> Option<[f64; 3]> {
        Some([0.0; 3])
    }
    fn constant(&self) -> Option<f64> {
        Some(self.0)
    }
}

impl Sensitivity for Constant {
    fn value(&self, _v: f64) -> f64 {
        self.0
    }
    fn derivative(&self, _v: f64) -> Option<f64> {
        Some(0.0)
    }
    fn constant(&self) -> Option<f64> {
        Some(self.0)
    }
}

type Scalar3 = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
type Vector3 = dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync;

/// A diffusion coefficient given by closures.
#[derive(Clone)]
pub struct FnDiffusion {
    pub label: String,
    value: Arc<Scalar3>,
    gradient: Option<Arc<Vector3>>,
}

impl FnDiffusion {
    pub fn new(label: impl Into<String>, value: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        FnDiffusion {
            label: label.into(),
            value: Arc::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(g));
        self
    }
}

impl fmt::Debug for FnDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnDiffusion")
            .field("label", &self.label)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl DiffusionCoefficient for FnDiffusion {
    fn value(&self, u: f64, v: f64, w: f64) -> f64 {
        (self.value)(u, v, w)
    }
    fn gradient(&self, u: f64, v: f64, w: f64) -> Option<[f64; 3]> {
        self.gradient.as_ref().map(|g| g(u, v, w))
    }
}

/// A sensitivity given by closures.
#[derive(Clone)]
pub struct FnSensitivity {
    pub label: String,
    value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    derivative: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl FnSensitivity {
    pub fn new(label: impl Into<String>, value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        FnSensitivity {
            label: label.into(),
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }
}

impl fmt::Debug for FnSensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSensitivity")
            .field("label", &self.label)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl Sensitivity for FnSensitivity {
    fn value(&self, v: f64) -> f64 {
        (self.value)(v)
    }
    fn derivative(&self, v: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(v))
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub d1: Arc<dyn DiffusionCoefficient>,
    pub d2: f64,
    pub chi: Arc<dyn Sensitivity>,
    pub lambda: f64,
    pub rho: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Width of the initial tumour profile.
    pub eps_ic: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        parameter_set(1).expect("set 1 exists")
    }
}

impl ModelParams {
    pub fn with_d1(mut self, d1: impl DiffusionCoefficient + 'static) -> Self {
        self.d1 = Arc::new(d1);
        self
    }

    pub fn with_chi(mut self, chi: impl Sensitivity + 'static) -> Self {
        self.chi = Arc::new(chi);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("d2", self.d2),
            ("lambda", self.lambda),
            ("rho", self.rho),
            ("eta", self.eta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eps_ic", self.eps_ic),
        ];
        for (name, v) in scalars {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        if self.d2 <= 0.0 {
            return Err(Error::InvalidArgument("d2 must be positive".into()));
        }
        if self.eps_ic <= 0.0 {
            return Err(Error::InvalidArgument("eps_ic must be positive".into()));
        }
        if let Some(d) = self.d1.constant() {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidArgument(format!("d1 must be positive, got {d}")));
            }
        }
        Ok(())
    }

    /// Partial derivatives of d1 at a point.
    pub fn d1_gradient(&self, u: f64, v: f64, w: f64, mode: JacobianMode) -> Result<[f64; 3]> {
        if let Some(g) = self.d1.gradient(u, v, w) {
            return Ok(g);
        }
        match mode {
            JacobianMode::Analytic => Err(Error::MissingDerivative("d1")),
            JacobianMode::FiniteDifference => {
                let x = [u, v, w];
                let mut g = [0.0; 3];
                for k in 0..3 {
                    let h = 1e-6 * x[k].abs().max(1.0);
                    let mut p = x;
                    let mut m = x;
                    p[k] += h;
                    m[k] -= h;
                    g[k] = (self.d1.value(p[0], p[1], p[2]) - self.d1.value(m[0], m[1], m[2])) / (2.0 * h);
                }
                Ok(g)
            }
        }
    }

    pub fn chi_derivative(&self, v: f64, mode: JacobianMode) -> Result<f64> {
        if let Some(d) = self.chi.derivative(v) {
            return Ok(d);
        }
        match mode {
            JacobianMode::Analytic => Err(Error::MissingDerivative("chi")),
            JacobianMode::FiniteDifference => {
                let h = 1e-6 * v.abs().max(1.0);
                Ok((self.chi.value(v + h) - self.chi.value(v - h)) / (2.0 * h))
            }
        }
    }
}

/// Built-in parameter sets 1 and 2.
pub fn parameter_set(which: u32) -> Result<ModelParams> {
    let set1 = ModelParams {
        d1: Arc::new(Constant(1e-4)),
        d2: 5e-4,
        chi: Arc::new(Constant(5e-3)),
        lambda: 0.75,
        rho: 1.5,
        eta: 10.0,
        alpha: 0.25,
        beta: 0.1,
        eps_ic: 0.01,
    };
    match which {
        1 => Ok(set1),
        2 => Ok(ModelParams {
            rho: 0.0,
            alpha: 0.1,
            beta: 0.0,
            chi: Arc::new(Constant(5e-5)),
            ..set1
        }),
        _ => Err(Error::InvalidArgument(format!("unknown parameter set {which}; expected 1 or 2"))),
    }
}

/// Pointwise nonlinear terms: `g1 = chi(v) u`, `g2 = lambda u (1-u-v)` and the
/// right-hand sides of the v and w equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reactions {
    pub g1: f64,
    pub g2: f64,
    pub fv: f64,
    pub fw: f64,
}

/// First partial derivatives of [`Reactions`] with respect to (u, v, w).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactionDerivatives {
    pub g1: [f64; 3],
    pub g2: [f64; 3],
    pub fv: [f64; 3],
    pub fw: [f64; 3],
}

pub fn reaction_terms(u: f64, v: f64, w: f64, p: &ModelParams) -> Reactions {
    let free = 1.0 - u - v;
    Reactions {
        g1: p.chi.value(v) * u,
        g2: p.lambda * u * free,
        fv: p.rho * v * free - p.eta * v * w,
        fw: p.alpha * u * (1.0 - w) - p.beta * w,
    }
}

pub fn reaction_derivatives(u: f64, v: f64, w: f64, p: &ModelParams, mode: JacobianMode) -> Result<ReactionDerivatives> {
    let chi = p.chi.value(v);
    let dchi = p.chi_derivative(v, mode)?;
    Ok(ReactionDerivatives {
        g1: [chi, dchi * u, 0.0],
        g2: [p.lambda * (1.0 - 2.0 * u - v), -p.lambda * u, 0.0],
        fv: [-p.rho * v, p.rho * (1.0 - u - 2.0 * v) - p.eta * w, -p.eta * v],
        fw: [p.alpha * (1.0 - w), 0.0, -p.alpha * u - p.beta],
    })
}

/// Initial tumour profile at a point.
pub fn initial_value(x: &Point, eps: f64) -> [f64; 3] {
    let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let u = if r2 <= 0.0625 { (-r2 / eps).exp() } else { 0.0 };
    [u, 1.0 - 0.5 * u, 0.5 * u]
}

pub fn initial_conditions(mesh: &SimplicialMesh, params: &ModelParams) -> StateFields {
    StateFields::interpolate(mesh, |x| initial_value(x, params.eps_ic))
}

/// Extra volume sources added to the right-hand sides.
pub trait Forcing: Send + Sync + fmt::Debug {
    fn source(&self, x: &Point, t: f64) -> [f64; 3];
}

pub type PointField = Arc<dyn Fn(&Point) -> [f64; 3] + Send + Sync>;

/// Initial data of a problem.
#[derive(Clone)]
pub enum InitialData {
    Tumour,
    /// The spatially constant rest state (0, 1, 0).
    Steady,
    Manufactured(ManufacturedCase),
    Custom(PointField),
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialData::Tumour => write!(f, "Tumour"),
            InitialData::Steady => write!(f, "Steady"),
            InitialData::Manufactured(c) => write!(f, "Manufactured({})", c.id),
            InitialData::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Parameters, forcing and initial data of one simulation.
#[derive(Clone, Debug)]
pub struct Problem {
    pub params: ModelParams,
    pub forcing: Option<Arc<dyn Forcing>>,
    pub initial: InitialData,
    pub exact: Option<ManufacturedCase>,
}

impl Problem {
    pub fn new(params: ModelParams) -> Self {
        Problem {
            params,
            forcing: None,
            initial: InitialData::Tumour,
            exact: None,
        }
    }

    pub fn steady(params: ModelParams) -> Self {
        Problem {
            initial: InitialData::Steady,
            ..Problem::new(params)
        }
    }

    /// The manufactured problem: sources chosen so that the case's closed form
    /// is the exact solution.
    pub fn manufactured(case: ManufacturedCase, params: ModelParams) -> Result<Self> {
        let forcing = case.forcing(&params)?;
        Ok(Problem {
            params,
            forcing: Some(Arc::new(forcing)),
            initial: InitialData::Manufactured(case.clone()),
            exact: Some(case),
        })
    }

    pub fn initial_value(&self, x: &Point) -> [f64; 3] {
        match &self.initial {
            InitialData::Tumour => initial_value(x, self.params.eps_ic),
            InitialData::Steady => [0.0, 1.0, 0.0],
            InitialData::Manufactured(c) => c.exact(x, 0.0),
            InitialData::Custom(f) => f(x),
        }
    }

    pub fn initial_state(&self, mesh: &SimplicialMesh) -> StateFields {
        StateFields::interpolate(mesh, |x| self.initial_value(x))
    }

    pub fn source(&self, x: &Point, t: f64) -> [f64; 3] {
        self.forcing.as_ref().map_or([0.0; 3], |f| f.source(x, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_sets() {
        let p1 = parameter_set(1).unwrap();
        assert_eq!(p1.eta, 10.0);
        let p2 = parameter_set(2).unwrap();
        assert_eq!(p2.chi.constant(), Some(0.00005));
        assert_eq!(p2.d2, 0.0005);
        assert_eq!((p2.rho, p2.alpha, p2.beta), (0.0, 0.1, 0.0));
        assert!(parameter_set(3).is_err());
        p1.validate().unwrap();
        p2.validate().unwrap();
    }

    #[test]
    fn steady_state_reactions_vanish() {
        for s in [1, 2] {
            let p = parameter_set(s).unwrap();
            let r = reaction_terms(0.0, 1.0, 0.0, &p);
            assert_eq!((r.g1, r.g2, r.fv, r.fw), (0.0, 0.0, 0.0, 0.0));
        }
        let r = reaction_terms(1.0, 0.0, 0.0, &parameter_set(1).unwrap());
        assert_eq!(r.g2, 0.0);
        assert_eq!(r.fw, 0.25);
    }

    #[test]
    fn initial_profile() {
        assert_eq!(initial_value(&[0.0; 3], 0.01), [1.0, 0.5, 0.5]);
        assert_eq!(initial_value(&[0.5, 0.0, 0.0], 0.01), [0.0, 1.0, 0.0]);
        let u = initial_value(&[0.25, 0.0, 0.0], 0.01)[0];
        assert!((u - 0.001_930_454_136_227_709_3).abs() < 1e-18);
    }

    #[test]
    fn missing_derivative_is_reported() {
        let p = parameter_set(1)
            .unwrap()
            .with_d1(FnDiffusion::new("quadratic", |u, _, _| 1e-4 * (1.0 + u * u)));
        assert!(matches!(p.d1_gradient(0.3, 0.5, 0.1, JacobianMode::Analytic), Err(Error::MissingDerivative("d1"))));
        let g = p.d1_gradient(0.3, 0.5, 0.1, JacobianMode::FiniteDifference).unwrap();
        assert!((g[0] - 2e-4 * 0.3).abs() < 1e-12);
        assert!(g[1].abs() < 1e-15);
    }
}
