//! Experiment orchestration, convergence studies and file output.

pub mod config;
pub mod output;
pub mod study;
pub mod verify;

use std::time::Instant;

pub use config::{ErrorNorm, Experiment, RunConfig, DESK_H_MIN, ENV_PREFIX};
pub use output::{emit_outputs, fmt_opt, provenance, read_csv, write_csv, Check, Phase, RunArtifact, Snapshot};
pub use study::{
    adaptive_run, adaptive_rungs, compare_at_matched_error, compute_eoc, compute_temporal_eoc, error_against, error_exact,
    reference_solution, run_adaptive_study, run_temporal_study, run_uniform_study, solve_uniform, Comparison,
    ConvergenceRow, Eoc, Solution, TemporalRow,
};
pub use verify::run_verification;

use crate::error::Result;

fn timed<T>(phases: &mut Vec<Phase>, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    phases.push(Phase {
        name: name.into(),
        wall_seconds: start.elapsed().as_secs_f64(),
    });
    Ok(out)
}

/// Dörfler-marked adaptive runs must use at most this fraction of the
/// uniform node count at matched error.
pub const MATCHED_DOF_RATIO: f64 = 0.6;
pub const SPATIAL_EOC_MIN: f64 = 1.8;
pub const TEMPORAL_EOC_RANGE: (f64, f64) = (0.85, 1.15);

/// Run the experiment described by `config`.
pub fn execute(config: &RunConfig) -> Result<RunArtifact> {
    config.validate()?;
    let mut art = RunArtifact {
        config: config.to_string(),
        ..Default::default()
    };
    let mut phases = Vec::new();
    match config.experiment {
        Experiment::Uniform => {
            let reference = timed(&mut phases, "reference", || reference_solution(config))?;
            art.rows = timed(&mut phases, "uniform", || run_uniform_study(config, Some(&reference)))?;
            art.eoc = (art.rows.len() >= 2).then(|| compute_eoc(&art.rows)).transpose()?;
        }
        Experiment::Adaptive | Experiment::Compare => {
            let reference = timed(&mut phases, "reference", || reference_solution(config))?;
            if config.experiment == Experiment::Compare {
                art.uniform_rows = timed(&mut phases, "uniform", || run_uniform_study(config, Some(&reference)))?;
                // The reference is itself the finest uniform level.
                if !config.levels.contains(&config.reference_level) {
                    art.uniform_rows.push(ConvergenceRow {
                        dofs: reference.space.num_nodes(),
                        l2_error: 0.0,
                        wall_seconds: reference.wall_seconds,
                    });
                }
            }
            let rungs = adaptive_rungs(config);
            for (i, amr) in rungs.iter().enumerate() {
                let last = i + 1 == rungs.len();
                let mut snaps = Vec::new();
                let every = config.vtu_every;
                let mut cb = |rec: &crate::amr::AdaptiveStepRecord,
                              space: &crate::fem::FeSpace,
                              state: &crate::fem::StateFields,
                              report: &crate::estimator::EstimatorReport| {
                    if every > 0 && rec.step.is_multiple_of(every) || (rec.t - config.t_final).abs() < 1e-12 {
                        snaps.push(Snapshot {
                            name: format!("step_{:05}", rec.step),
                            mesh: space.mesh_arc().clone(),
                            state: state.clone(),
                            indicator: report.marking.clone(),
                        });
                    }
                };
                let want = last && config.write_vtu;
                let run = timed(&mut phases, &format!("adaptive-{i}"), || {
                    adaptive_run(config, amr.clone(), if want { Some(&mut cb) } else { None })
                })?;
                let err = error_against(&reference, &run.space, &run.state, config.error_norm)?;
                art.rows.push(ConvergenceRow {
                    dofs: run.steps.last().map_or(run.space.num_nodes(), |s| s.dofs),
                    l2_error: err,
                    wall_seconds: run.wall_seconds,
                });
                if last {
                    art.steps = run.steps;
                    art.snapshots = snaps;
                }
            }
            art.eoc = (art.rows.len() >= 2).then(|| compute_eoc(&art.rows)).transpose()?;
            if config.experiment == Experiment::Compare {
                art.comparisons = art.rows.iter().map(|r| compare_at_matched_error(r, &art.uniform_rows)).collect();
                if let Some(c) = art.comparisons.last() {
                    art.checks.push(Check {
                        name: "matched-error dofs".into(),
                        passed: c.dof_ratio.is_some_and(|r| r <= MATCHED_DOF_RATIO),
                        detail: format!("ratio {} (limit {MATCHED_DOF_RATIO})", fmt_opt(c.dof_ratio)),
                    });
                    art.checks.push(Check {
                        name: "matched-error wall time".into(),
                        passed: c.wall_ratio.is_some_and(|r| r < 1.0),
                        detail: format!("ratio {}", fmt_opt(c.wall_ratio)),
                    });
                }
            }
        }
        Experiment::MmsSpatial => {
            art.rows = timed(&mut phases, "mms-spatial", || run_uniform_study(config, None))?;
            if art.rows.len() >= 2 {
                let eoc = compute_eoc(&art.rows)?;
                for (i, p) in eoc.pairs.iter().enumerate() {
                    art.checks.push(Check {
                        name: format!("spatial EOC pair {i}"),
                        passed: p.is_some_and(|x| x >= SPATIAL_EOC_MIN),
                        detail: format!("{} (minimum {SPATIAL_EOC_MIN})", fmt_opt(*p)),
                    });
                }
                art.eoc = Some(eoc);
            }
        }
        Experiment::MmsTemporal => {
            art.temporal_rows = timed(&mut phases, "mms-temporal", || run_temporal_study(config))?;
            art.temporal_eoc = compute_temporal_eoc(&art.temporal_rows);
            let (lo, hi) = TEMPORAL_EOC_RANGE;
            for (i, p) in art.temporal_eoc.iter().enumerate() {
                art.checks.push(Check {
                    name: format!("temporal EOC pair {i}"),
                    passed: p.is_some_and(|x| (lo..=hi).contains(&x)),
                    detail: format!("{} (range {lo}..{hi})", fmt_opt(*p)),
                });
            }
        }
    }
    art.phases = phases;
    Ok(art)
}
