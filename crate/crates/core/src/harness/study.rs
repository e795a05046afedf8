use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ErrorNorm, RunConfig};
use crate::amr::{run_adaptive, AdaptiveRun, AdaptiveRunConfig, AmrConfig, SnapshotCallback};
use crate::error::{Error, Result};
use crate::fem::{error_norms_fn, norms, FeSpace, StateFields};
use crate::mesh::{build_structured_cube, build_transfer};
use crate::model::{manufactured_case, ManufacturedCase, Problem};
use crate::solver::{time_loop, TimeLoopOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dofs: usize,
    pub l2_error: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub tau: f64,
    pub l2_error: f64,
    pub wall_seconds: f64,
}

/// A discrete solution at the final time.
#[derive(Clone, Debug)]
pub struct Solution {
    pub space: Arc<FeSpace>,
    pub state: StateFields,
    pub wall_seconds: f64,
}

/// Backward Euler on a uniformly refined root mesh.
pub fn solve_uniform(problem: &Problem, root_n: usize, level: usize, tau: f64, t_final: f64) -> Result<Solution> {
    let start = Instant::now();
    let space = Arc::new(FeSpace::from_mesh(build_structured_cube(root_n)?.refine_uniform(level))?);
    let initial = problem.initial_state(space.mesh());
    let traj = time_loop(&space, problem, initial, t_final, tau, &TimeLoopOptions::default(), None)?;
    if let Some(why) = traj.aborted {
        return Err(Error::InvalidArgument(format!("uniform level {level} aborted: {why}")));
    }
    Ok(Solution {
        space,
        state: traj.final_state,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Distance to a reference solution on a nested finer mesh.
pub fn error_against(reference: &Solution, space: &FeSpace, state: &StateFields, norm: ErrorNorm) -> Result<f64> {
    let map = build_transfer(space.mesh(), reference.space.mesh())?;
    let on_ref = state.transfer(&map)?;
    let diff = on_ref.difference(&reference.state)?;
    Ok(match norm {
        ErrorNorm::U => norms(&reference.space, &diff.u).l2,
        ErrorNorm::Composite => (0..3).map(|f| norms(&reference.space, diff.field(f)).l2.powi(2)).sum::<f64>().sqrt(),
    })
}

/// Distance to the exact manufactured solution at time `t`.
pub fn error_exact(case: &ManufacturedCase, space: &FeSpace, state: &StateFields, t: f64, norm: ErrorNorm) -> f64 {
    let e = |f: usize| error_norms_fn(space, state.field(f), |x| case.exact(x, t)[f], |x| case.gradient(x, t)[f]).l2;
    match norm {
        ErrorNorm::U => e(0),
        ErrorNorm::Composite => (0..3).map(|f| e(f).powi(2)).sum::<f64>().sqrt(),
    }
}

fn problem_for(config: &RunConfig, manufactured: bool) -> Result<Problem> {
    let params = config.params()?;
    if manufactured {
        Problem::manufactured(manufactured_case(&config.case)?, params)
    } else {
        Ok(Problem::new(params))
    }
}

pub fn reference_solution(config: &RunConfig) -> Result<Solution> {
    let problem = problem_for(config, false)?;
    solve_uniform(&problem, config.root_n, config.reference_level, config.tau, config.t_final)
}

fn sort_rows(rows: &mut [ConvergenceRow]) {
    rows.sort_by_key(|a| a.dofs);
    if rows.windows(2).any(|w| w[1].l2_error >= w[0].l2_error) {
        log::warn!("errors are not strictly decreasing in dofs");
    }
}

/// One row per entry of `config.levels`. In `mms-spatial` mode the error is
/// measured against the exact solution, otherwise against `reference`.
pub fn run_uniform_study(config: &RunConfig, reference: Option<&Solution>) -> Result<Vec<ConvergenceRow>> {
    let manufactured = config.experiment == super::config::Experiment::MmsSpatial;
    let problem = problem_for(config, manufactured)?;
    let case = manufactured.then(|| manufactured_case(&config.case)).transpose()?;
    let owned;
    let reference = match (manufactured, reference) {
        (true, _) => None,
        (false, Some(r)) => Some(r),
        (false, None) => {
            owned = reference_solution(config)?;
            Some(&owned)
        }
    };
    let mut rows = Vec::new();
    for &level in &config.levels {
        let sol = solve_uniform(&problem, config.root_n, level, config.tau, config.t_final)?;
        let err = match (&case, reference) {
            (Some(c), _) => error_exact(c, &sol.space, &sol.state, config.t_final, config.error_norm),
            (None, Some(r)) => error_against(r, &sol.space, &sol.state, config.error_norm)?,
            (None, None) => unreachable!(),
        };
        log::info!("uniform level {level}: {} nodes, error {err:.4e}, {:.1}s", sol.space.num_nodes(), sol.wall_seconds);
        rows.push(ConvergenceRow {
            dofs: sol.space.num_nodes(),
            l2_error: err,
            wall_seconds: sol.wall_seconds,
        });
    }
    sort_rows(&mut rows);
    Ok(rows)
}

/// Temporal self-convergence on the mesh `config.levels[0]`: each step size
/// is compared with a run using a sixteenth of the smallest step.
pub fn run_temporal_study(config: &RunConfig) -> Result<Vec<TemporalRow>> {
    let problem = problem_for(config, true)?;
    let level = *config.levels.first().ok_or_else(|| Error::Config("levels must not be empty".into()))?;
    let tau_min = config.taus.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = solve_uniform(&problem, config.root_n, level, tau_min / 16.0, config.t_final)?;
    let mut rows = Vec::new();
    for &tau in &config.taus {
        let sol = solve_uniform(&problem, config.root_n, level, tau, config.t_final)?;
        let err = error_against(&reference, &sol.space, &sol.state, config.error_norm)?;
        rows.push(TemporalRow {
            tau,
            l2_error: err,
            wall_seconds: sol.wall_seconds,
        });
    }
    rows.sort_by(|a, b| b.tau.total_cmp(&a.tau));
    Ok(rows)
}

/// The adaptive runs of a study, one per ladder rung.
pub fn adaptive_rungs(config: &RunConfig) -> Vec<AmrConfig> {
    if !config.dofs_ladder.is_empty() {
        config
            .dofs_ladder
            .iter()
            .map(|&m| AmrConfig {
                max_dofs: Some(m),
                ..config.amr.clone()
            })
            .collect()
    } else if !config.tol_ladder.is_empty() {
        config
            .tol_ladder
            .iter()
            .map(|&t| AmrConfig {
                tol_x: t,
                ..config.amr.clone()
            })
            .collect()
    } else {
        vec![config.amr.clone()]
    }
}

pub fn adaptive_run(config: &RunConfig, amr: AmrConfig, snapshot: Option<SnapshotCallback<'_>>) -> Result<AdaptiveRun> {
    let problem = problem_for(config, false)?;
    let cfg = AdaptiveRunConfig::new(amr, config.root_n, config.base_level, config.tau, config.t_final);
    let run = run_adaptive(&problem, &cfg, snapshot)?;
    if let Some(why) = &run.aborted {
        return Err(Error::InvalidArgument(format!("adaptive run aborted: {why}")));
    }
    Ok(run)
}

/// One row per rung; `dofs` is the node count of the final solve.
pub fn run_adaptive_study(config: &RunConfig, reference: Option<&Solution>) -> Result<(Vec<ConvergenceRow>, Vec<AdaptiveRun>)> {
    let owned;
    let reference = match reference {
        Some(r) => r,
        None => {
            owned = reference_solution(config)?;
            &owned
        }
    };
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for amr in adaptive_rungs(config) {
        let run = adaptive_run(config, amr, None)?;
        let err = error_against(reference, &run.space, &run.state, config.error_norm)?;
        let dofs = run.steps.last().map_or(run.space.num_nodes(), |s| s.dofs);
        log::info!("adaptive rung: {dofs} nodes, error {err:.4e}, {:.1}s", run.wall_seconds);
        rows.push(ConvergenceRow {
            dofs,
            l2_error: err,
            wall_seconds: run.wall_seconds,
        });
        runs.push(run);
    }
    Ok((rows, runs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub adaptive: ConvergenceRow,
    /// Cheapest uniform row with an error no larger than the adaptive one.
    pub uniform: Option<ConvergenceRow>,
    pub dof_ratio: Option<f64>,
    pub wall_ratio: Option<f64>,
}

pub fn compare_at_matched_error(adaptive: &ConvergenceRow, uniform: &[ConvergenceRow]) -> Comparison {
    let best = uniform
        .iter()
        .filter(|r| r.l2_error <= adaptive.l2_error)
        .min_by_key(|r| r.dofs)
        .cloned();
    Comparison {
        adaptive: adaptive.clone(),
        dof_ratio: best.as_ref().map(|u| adaptive.dofs as f64 / u.dofs as f64),
        wall_ratio: best.as_ref().map(|u| adaptive.wall_seconds / u.wall_seconds),
        uniform: best,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eoc {
    /// `3 ln(e_i / e_{i+1}) / ln(N_{i+1} / N_i)`; `None` where a pair was
    /// skipped.
    pub pairs: Vec<Option<f64>>,
    /// Least-squares slope of `ln e` against `ln N^{-1/3}`.
    pub aggregate: Option<f64>,
    pub notices: Vec<String>,
}

pub fn compute_eoc(rows: &[ConvergenceRow]) -> Result<Eoc> {
    if rows.len() < 2 {
        return Err(Error::InvalidArgument("at least two rows are needed".into()));
    }
    let mut notices = Vec::new();
    let pairs = rows
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let (a, b) = (&w[0], &w[1]);
            if a.l2_error <= 0.0 || b.l2_error <= 0.0 {
                notices.push(format!("pair {i}: zero error, skipped"));
                None
            } else if a.dofs == b.dofs {
                notices.push(format!("pair {i}: equal dofs, skipped"));
                None
            } else {
                Some(3.0 * (a.l2_error / b.l2_error).ln() / (b.dofs as f64 / a.dofs as f64).ln())
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.l2_error > 0.0 && r.dofs > 0)
        .map(|r| (-(r.dofs as f64).ln() / 3.0, r.l2_error.ln()))
        .collect();
    let aggregate = least_squares_slope(&pts);
    if aggregate.is_none() {
        notices.push("aggregate needs two rows with distinct dofs and nonzero error".into());
    }
    Ok(Eoc {
        pairs,
        aggregate,
        notices,
    })
}

/// `ln(e_i / e_{i+1}) / ln(tau_i / tau_{i+1})`.
pub fn compute_temporal_eoc(rows: &[TemporalRow]) -> Vec<Option<f64>> {
    rows.windows(2)
        .map(|w| {
            (w[0].l2_error > 0.0 && w[1].l2_error > 0.0 && w[0].tau != w[1].tau)
                .then(|| (w[0].l2_error / w[1].l2_error).ln() / (w[0].tau / w[1].tau).ln())
        })
        .collect()
}

fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dofs: usize, e: f64) -> ConvergenceRow {
        ConvergenceRow {
            dofs,
            l2_error: e,
            wall_seconds: 0.0,
        }
    }

    #[test]
    fn eoc_arithmetic() {
        let e = compute_eoc(&[row(100, 0.1), row(800, 0.05)]).unwrap();
        assert!((e.pairs[0].unwrap() - 1.0).abs() < 1e-12);
        assert!((e.aggregate.unwrap() - 1.0).abs() < 1e-12);
        let e = compute_eoc(&[row(100, 0.1), row(800, 0.1)]).unwrap();
        assert_eq!(e.pairs[0], Some(0.0));
        let e = compute_eoc(&[row(100, 0.0), row(800, 0.1)]).unwrap();
        assert_eq!(e.pairs[0], None);
        assert_eq!(e.notices.len(), 2);
    }
}
