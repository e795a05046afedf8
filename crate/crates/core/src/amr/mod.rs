//! Solve, estimate, mark, refine/coarsen.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, initial_data_error, initial_data_indicator, AccumulatedEstimate, EstimatorOptions, EstimatorReport};
use crate::fem::{norms, FeSpace, StateFields};
use crate::mesh::{build_structured_cube, build_transfer, CoarsenOptions, CoarsenStats, RefineOptions, SimplicialMesh, DEFAULT_H_MIN};
use crate::model::Problem;
use crate::solver::{newton_solve, NewtonOptions, TimeStepRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmrConfig {
    /// Accept a step once `sqrt(alpha + theta) <= tol_x * |state|_H1`. On the
    /// first step the initial interpolation error divided by the step is
    /// added under the root.
    pub tol_x: f64,
    /// Dörfler fraction.
    pub bulk_theta: f64,
    /// Elements below this fraction of the mean marking value are coarsened.
    pub coarsen_fraction: f64,
    pub max_refine_loops_per_step: usize,
    /// Refinements of the starting mesh driven by the interpolation error of
    /// the initial data, before the first step.
    pub initial_refine_loops: usize,
    /// Add the initial interpolation error (divided by the step) to the
    /// indicator of the first step.
    pub first_step_initial_term: bool,
    pub h_min: f64,
    pub max_dofs: Option<usize>,
    pub coarsen: bool,
    /// Coarsening never goes below this bisection level.
    pub min_level: u32,
}

impl Default for AmrConfig {
    fn default() -> Self {
        AmrConfig {
            tol_x: 1e-3,
            bulk_theta: 0.5,
            coarsen_fraction: 0.05,
            max_refine_loops_per_step: 3,
            initial_refine_loops: 10,
            first_step_initial_term: true,
            h_min: DEFAULT_H_MIN,
            max_dofs: None,
            coarsen: true,
            min_level: 0,
        }
    }
}

impl AmrConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.tol_x > 0.0) {
            return bad("tol_x must be positive");
        }
        if !(self.bulk_theta > 0.0 && self.bulk_theta < 1.0) {
            return bad("bulk_theta must lie in (0, 1)");
        }
        if !(self.coarsen_fraction >= 0.0 && self.coarsen_fraction < self.bulk_theta) {
            return bad("coarsen_fraction must lie in [0, bulk_theta)");
        }
        if !(self.h_min >= 0.0) {
            return bad("h_min must be non-negative");
        }
        if self.max_dofs == Some(0) {
            return bad("max_dofs must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Marking {
    pub refine: Vec<usize>,
    pub coarsen: Vec<usize>,
}

/// Dörfler marking on raw values. The refine set is the shortest prefix of the
/// elements sorted by descending value (ties by index) whose sum reaches
/// `bulk_theta` of the total.
pub fn mark_values(values: &[f64], bulk_theta: f64, coarsen_fraction: f64) -> Marking {
    let total: f64 = values.iter().sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let target = bulk_theta * total;
    let mut refine = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        if acc >= target {
            break;
        }
        acc += values[i];
        refine.push(i);
    }
    let mut in_refine = vec![false; values.len()];
    for &i in &refine {
        in_refine[i] = true;
    }
    let threshold = if values.is_empty() { 0.0 } else { coarsen_fraction * total / values.len() as f64 };
    let coarsen = (0..values.len()).filter(|&i| !in_refine[i] && values[i] < threshold).collect();
    refine.sort_unstable();
    Marking { refine, coarsen }
}

pub fn mark(report: &EstimatorReport, config: &AmrConfig) -> Marking {
    mark_values(&report.marking, config.bulk_theta, config.coarsen_fraction)
}

/// `sqrt(sum_i |z_i|_H1^2)`.
pub fn composite_h1(space: &FeSpace, state: &StateFields) -> f64 {
    (0..3).map(|f| norms(space, state.field(f)).h1.powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug)]
pub struct AdaptStep {
    pub space: Arc<FeSpace>,
    pub state: StateFields,
    /// Estimate of the accepted solve (on the mesh before any coarsening).
    pub report: EstimatorReport,
    pub record: TimeStepRecord,
    pub refine_loops: usize,
    pub budget_exceeded: bool,
    pub coarsened: Option<CoarsenStats>,
    /// Mesh and solution of the accepted solve, before coarsening.
    pub solve_space: Arc<FeSpace>,
    pub solve_state: StateFields,
}

/// How the previous state reaches a refined mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrevTransfer {
    /// Interpolate the P1 field (exact for nested meshes).
    Transfer,
    /// Re-interpolate the problem's initial data.
    Initial,
}

#[derive(Clone, Debug, Default)]
pub struct StepSettings {
    pub newton: NewtonOptions,
    pub estimator: EstimatorOptions,
}

/// One adaptive step from `prev` on `space` to time `t`.
#[allow(clippy::too_many_arguments)]
pub fn adapt_step(
    space: Arc<FeSpace>,
    prev: &StateFields,
    tau: f64,
    t: f64,
    problem: &Problem,
    config: &AmrConfig,
    settings: &StepSettings,
    prev_mode: PrevTransfer,
) -> Result<AdaptStep> {
    config.validate()?;
    prev.check_on(space.mesh())?;
    let mut space = space;
    let mut prev = prev.clone();
    let mut loops = 0;
    let mut budget_exceeded = false;
    let (state, report, record) = loop {
        let (state, record) = newton_solve(&space, problem, &prev, tau, t, &settings.newton)?;
        let mut report = estimate(&space, problem, &state, &prev, tau, t, &settings.estimator)?;
        let mut eta2 = report.alpha + report.theta;
        if prev_mode == PrevTransfer::Initial && config.first_step_initial_term {
            // The interpolation error of the initial data enters the estimate
            // once; spread over the first step it is comparable to tau * alpha.
            for (m, e) in report.marking.iter_mut().zip(initial_data_indicator(&space, problem)) {
                *m += e / tau;
                eta2 += e / tau;
            }
        }
        let eta = eta2.sqrt();
        let scale = composite_h1(&space, &state);
        log::debug!(
            "t={t:.4} loop {loops}: {} nodes, eta={eta:.3e}, target={:.3e}",
            space.num_nodes(),
            config.tol_x * scale
        );
        if eta <= config.tol_x * scale || loops >= config.max_refine_loops_per_step {
            break (state, report, record);
        }
        // Elements at the diameter floor cannot be refined, so the bulk
        // criterion is applied to the rest.
        let mesh = space.mesh();
        let open: Vec<f64> = (0..mesh.num_cells())
            .map(|k| if mesh.refinable(k, config.h_min) { report.marking[k] } else { 0.0 })
            .collect();
        let marked = mark_values(&open, config.bulk_theta, config.coarsen_fraction);
        if marked.refine.is_empty() {
            break (state, report, record);
        }
        let (fine, stats) = space.mesh().refine_with(&marked.refine, &RefineOptions { h_min: config.h_min });
        if stats.bisections == 0 {
            break (state, report, record);
        }
        if config.max_dofs.is_some_and(|m| fine.num_vertices() > m) {
            budget_exceeded = true;
            break (state, report, record);
        }
        prev = match prev_mode {
            PrevTransfer::Initial => problem.initial_state(&fine),
            PrevTransfer::Transfer => prev.transfer(&build_transfer(space.mesh(), &fine)?)?,
        };
        space = Arc::new(FeSpace::from_mesh(fine)?);
        loops += 1;
    };
    let mut out = AdaptStep {
        solve_space: space.clone(),
        solve_state: state.clone(),
        space,
        state,
        report,
        record,
        refine_loops: loops,
        budget_exceeded,
        coarsened: None,
    };
    if config.coarsen {
        let marked = mark(&out.report, config);
        if !marked.coarsen.is_empty() {
            let (coarse, stats) = out.space.mesh().coarsen_with(
                &marked.coarsen,
                &CoarsenOptions {
                    min_level: config.min_level,
                },
            );
            if stats.merged_pairs > 0 {
                out.state = out.state.transfer(&build_transfer(out.space.mesh(), &coarse)?)?;
                out.space = Arc::new(FeSpace::from_mesh(coarse)?);
            }
            out.coarsened = Some(stats);
        }
    }
    Ok(out)
}

/// Refine `space` until the interpolation error of the initial data satisfies
/// `sqrt(sum_K e_K) <= tol_x * |I z0|_H1`, or the loop, floor or node budget
/// runs out. Returns the mesh and the number of refinements.
pub fn adapt_initial_mesh(space: Arc<FeSpace>, problem: &Problem, config: &AmrConfig) -> Result<(Arc<FeSpace>, usize)> {
    config.validate()?;
    let mut space = space;
    for loops in 0..config.initial_refine_loops {
        let err = initial_data_indicator(&space, problem);
        let z0 = problem.initial_state(space.mesh());
        let total: f64 = err.iter().sum();
        if total.sqrt() <= config.tol_x * composite_h1(&space, &z0) {
            return Ok((space, loops));
        }
        let mesh = space.mesh();
        let open: Vec<f64> = (0..mesh.num_cells())
            .map(|k| if mesh.refinable(k, config.h_min) { err[k] } else { 0.0 })
            .collect();
        let marked = mark_values(&open, config.bulk_theta, 0.0);
        if marked.refine.is_empty() {
            return Ok((space, loops));
        }
        let (fine, stats) = mesh.refine_with(&marked.refine, &RefineOptions { h_min: config.h_min });
        if stats.bisections == 0 || config.max_dofs.is_some_and(|m| fine.num_vertices() > m) {
            return Ok((space, loops));
        }
        space = Arc::new(FeSpace::from_mesh(fine)?);
    }
    Ok((space, config.initial_refine_loops))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveStepRecord {
    pub step: usize,
    pub t: f64,
    pub tau: f64,
    /// Nodes of the mesh the step was solved on.
    pub dofs: usize,
    pub cells: usize,
    /// Nodes carried to the next step (after coarsening).
    pub dofs_after: usize,
    pub alpha: f64,
    pub theta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub k_n: usize,
    pub linear_iters: usize,
    pub refine_loops: usize,
    pub budget_exceeded: bool,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptiveRunConfig {
    pub amr: AmrConfig,
    pub root_n: usize,
    /// Uniform bisections applied to the root before the run.
    pub base_level: usize,
    pub tau: f64,
    pub t_final: f64,
    pub settings: StepSettings,
}

impl AdaptiveRunConfig {
    pub fn new(amr: AmrConfig, root_n: usize, base_level: usize, tau: f64, t_final: f64) -> Self {
        AdaptiveRunConfig {
            amr,
            root_n,
            base_level,
            tau,
            t_final,
            settings: StepSettings::default(),
        }
    }

    pub fn base_mesh(&self) -> Result<SimplicialMesh> {
        Ok(build_structured_cube(self.root_n)?.refine_uniform(self.base_level))
    }
}

#[derive(Clone, Debug)]
pub struct AdaptiveRun {
    pub steps: Vec<AdaptiveStepRecord>,
    pub space: Arc<FeSpace>,
    pub state: StateFields,
    pub final_time: f64,
    pub estimate: AccumulatedEstimate,
    pub wall_seconds: f64,
    pub aborted: Option<String>,
}

pub type SnapshotCallback<'a> = &'a mut dyn FnMut(&AdaptiveStepRecord, &FeSpace, &StateFields, &EstimatorReport);

/// Full adaptive trajectory from the problem's initial data. Steps that fail
/// to converge are retried with half the step, down to `tau / 64`. The
/// snapshot callback sees each accepted solve before coarsening.
pub fn run_adaptive(problem: &Problem, cfg: &AdaptiveRunConfig, mut snapshot: Option<SnapshotCallback<'_>>) -> Result<AdaptiveRun> {
    cfg.amr.validate()?;
    if !(cfg.tau > 0.0 && cfg.t_final > 0.0) {
        return Err(Error::Config("tau and t_final must be positive".into()));
    }
    let start = Instant::now();
    let (mut space, _) = adapt_initial_mesh(Arc::new(FeSpace::from_mesh(cfg.base_mesh()?)?), problem, &cfg.amr)?;
    let mut state = problem.initial_state(space.mesh());
    let mut estimate_acc = AccumulatedEstimate::with_initial(initial_data_error(&space, problem));
    let mut steps = Vec::new();
    let mut t = 0.0;
    let eps = 1e-12 * cfg.t_final.max(1.0);
    let tau_min = cfg.tau / 64.0;
    let mut aborted = None;
    while t < cfg.t_final - eps {
        let step_start = Instant::now();
        let mut tau = cfg.tau;
        let outcome = loop {
            let t_new = if t + tau >= cfg.t_final - eps { cfg.t_final } else { t + tau };
            let mode = if steps.is_empty() { PrevTransfer::Initial } else { PrevTransfer::Transfer };
            match adapt_step(space.clone(), &state, t_new - t, t_new, problem, &cfg.amr, &cfg.settings, mode) {
                Ok(s) => break Some(s),
                Err(Error::StepFailure(f)) if (t_new - t) / 2.0 >= tau_min => {
                    log::warn!("adaptive step at t={t} failed ({f}); halving");
                    tau = (t_new - t) / 2.0;
                }
                Err(Error::StepFailure(f)) => {
                    aborted = Some(format!("step size fell below {tau_min:e} at t={t}: {f}"));
                    break None;
                }
                Err(e) => return Err(e),
            }
        };
        let Some(out) = outcome else { break };
        estimate_acc.add(&out.report);
        t = out.record.t_n;
        let rec = AdaptiveStepRecord {
            step: steps.len() + 1,
            t,
            tau: out.record.tau_n,
            dofs: out.solve_space.num_nodes(),
            cells: out.report.marking.len(),
            dofs_after: out.space.num_nodes(),
            alpha: out.report.alpha,
            theta: out.report.theta,
            gamma: out.report.gamma,
            kappa: out.report.kappa,
            k_n: out.record.k_n,
            linear_iters: out.record.linear_iters,
            refine_loops: out.refine_loops,
            budget_exceeded: out.budget_exceeded,
            wall_seconds: step_start.elapsed().as_secs_f64(),
        };
        if let Some(cb) = snapshot.as_mut() {
            cb(&rec, &out.solve_space, &out.solve_state, &out.report);
        }
        steps.push(rec);
        space = out.space;
        state = out.state;
    }
    Ok(AdaptiveRun {
        steps,
        space,
        state,
        final_time: t,
        estimate: estimate_acc,
        wall_seconds: start.elapsed().as_secs_f64(),
        aborted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_values() {
        let m = mark_values(&[1.0; 10], 0.5, 0.05);
        assert_eq!(m.refine.len(), 5);
        assert!(m.coarsen.is_empty());
    }

    #[test]
    fn single_carrier() {
        let mut v = vec![0.0; 8];
        v[3] = 2.0;
        let m = mark_values(&v, 0.5, 0.05);
        assert_eq!(m.refine, vec![3]);
        assert_eq!(m.coarsen.len(), 7);
    }

    #[test]
    fn config_invariants() {
        assert!(AmrConfig::default().validate().is_ok());
        let bad = AmrConfig {
            coarsen_fraction: 0.6,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
