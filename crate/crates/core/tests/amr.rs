use std::sync::Arc;

use invadapt::amr::{
    adapt_initial_mesh, adapt_step, mark_values, run_adaptive, AdaptiveRunConfig, AdaptiveStepRecord, AmrConfig,
    PrevTransfer, StepSettings,
};
use invadapt::estimator::{estimate, initial_data_indicator, EstimatorOptions, EstimatorReport};
use invadapt::fem::{FeSpace, StateFields};
use invadapt::mesh::build_structured_cube;
use invadapt::model::{parameter_set, Problem};
use invadapt::solver::{newton_solve, NewtonOptions};
use proptest::prelude::*;

fn base(level: usize) -> Arc<FeSpace> {
    Arc::new(FeSpace::from_mesh(build_structured_cube(4).unwrap().refine_uniform(level)).unwrap())
}

proptest! {
    #[test]
    fn dorfler_set_is_a_minimal_bulk_set(values in prop::collection::vec(0.0f64..10.0, 1..=12), theta in 0.05f64..0.95) {
        let m = mark_values(&values, theta, 0.05);
        let total: f64 = values.iter().sum();
        let marked: f64 = m.refine.iter().map(|&i| values[i]).sum();
        prop_assert!(marked >= theta * total * (1.0 - 1e-12));
        // No subset with fewer elements reaches the bulk fraction.
        let n = values.len();
        let best = (0u32..1 << n)
            .filter(|mask| (0..n).filter(|i| mask & (1 << i) != 0).map(|i| values[i]).sum::<f64>() >= theta * total)
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap();
        prop_assert_eq!(m.refine.len(), best);
        let mean = total / n as f64;
        for &c in &m.coarsen {
            prop_assert!(!m.refine.contains(&c));
            prop_assert!(values[c] < 0.05 * mean);
        }
    }
}

#[test]
fn ties_broken_by_index() {
    let m = mark_values(&[1.0, 2.0, 2.0, 2.0, 1.0], 0.5, 0.0);
    assert_eq!(m.refine, vec![1, 2]);
}

#[test]
fn rest_state_never_refines() {
    let space = base(0);
    let problem = Problem::steady(parameter_set(1).unwrap());
    let z = problem.initial_state(space.mesh());
    let cfg = AmrConfig {
        tol_x: 1e-12,
        coarsen: false,
        ..Default::default()
    };
    let out = adapt_step(space.clone(), &z, 0.01, 0.01, &problem, &cfg, &StepSettings::default(), PrevTransfer::Transfer).unwrap();
    assert_eq!(out.refine_loops, 0);
    assert_eq!(out.space.num_nodes(), space.num_nodes());
}

#[test]
fn loose_tolerance_accepts_first_solve() {
    let space = base(0);
    let problem = Problem::new(parameter_set(1).unwrap());
    let z = problem.initial_state(space.mesh());
    let cfg = AmrConfig {
        tol_x: 1e6,
        coarsen: false,
        ..Default::default()
    };
    let out = adapt_step(space.clone(), &z, 0.01, 0.01, &problem, &cfg, &StepSettings::default(), PrevTransfer::Initial).unwrap();
    assert_eq!(out.refine_loops, 0);
    assert!(Arc::ptr_eq(&out.space, &space));
}

#[test]
fn tight_tolerance_refines_and_respects_budget() {
    let space = base(0);
    let problem = Problem::new(parameter_set(1).unwrap());
    let z = problem.initial_state(space.mesh());
    let cfg = AmrConfig {
        tol_x: 1e-8,
        coarsen: false,
        h_min: 0.0,
        max_dofs: Some(200),
        max_refine_loops_per_step: 50,
        ..Default::default()
    };
    let out = adapt_step(space.clone(), &z, 0.01, 0.01, &problem, &cfg, &StepSettings::default(), PrevTransfer::Initial).unwrap();
    assert!(out.refine_loops >= 1);
    assert!(out.space.num_nodes() > space.num_nodes());
    assert!(out.space.num_nodes() <= 200);
    assert!(out.budget_exceeded);
    assert!(out.space.mesh().audit().is_valid());
}

#[test]
fn first_step_marks_the_tumour() {
    // On the 8^3 mesh every element of the first Dörfler set touches the
    // support ball r <= 0.25 of the initial tumour, with and without the
    // initial-data term.
    let space = base(3);
    let problem = Problem::new(parameter_set(1).unwrap());
    let z0 = problem.initial_state(space.mesh());
    let tau = 0.01;
    let (z1, _) = newton_solve(&space, &problem, &z0, tau, tau, &NewtonOptions::default()).unwrap();
    let r = estimate(&space, &problem, &z1, &z0, tau, tau, &EstimatorOptions::default()).unwrap();
    let init = initial_data_indicator(&space, &problem);
    let with_init: Vec<f64> = r.marking.iter().zip(&init).map(|(a, b)| a + b / tau).collect();
    for values in [&r.marking, &with_init] {
        let m = mark_values(values, 0.5, 0.05);
        assert!(!m.refine.is_empty());
        for &c in &m.refine {
            let rmin = space
                .mesh()
                .cell_points(c)
                .iter()
                .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(rmin <= 0.25, "cell {c} at distance {rmin}");
        }
    }
}

#[test]
fn initial_mesh_adaptation_reduces_interpolation_error() {
    let space = base(0);
    let problem = Problem::new(parameter_set(1).unwrap());
    let cfg = AmrConfig {
        h_min: 0.05,
        ..Default::default()
    };
    let before: f64 = initial_data_indicator(&space, &problem).iter().sum();
    let (fine, loops) = adapt_initial_mesh(space.clone(), &problem, &cfg).unwrap();
    let after: f64 = initial_data_indicator(&fine, &problem).iter().sum();
    assert!(loops >= 1);
    assert!(after < before);
    assert!(fine.mesh().audit().is_valid());
    assert!(fine.mesh().min_diameter() >= 0.05 * (1.0 - 1e-12));
}

fn short_run(coarsen: bool) -> (Vec<AdaptiveStepRecord>, Vec<bool>) {
    let problem = Problem::new(parameter_set(1).unwrap());
    let amr = AmrConfig {
        tol_x: 2e-3,
        h_min: 0.1,
        coarsen,
        min_level: 0,
        initial_refine_loops: 2,
        ..Default::default()
    };
    let cfg = AdaptiveRunConfig::new(amr, 4, 0, 0.01, 0.04);
    let mut legal = Vec::new();
    let mut cb = |_: &AdaptiveStepRecord, s: &FeSpace, z: &StateFields, r: &EstimatorReport| {
        legal.push(s.mesh().audit().is_valid() && z.check_on(s.mesh()).is_ok() && r.marking.len() == s.mesh().num_cells());
    };
    let run = run_adaptive(&problem, &cfg, Some(&mut cb)).unwrap();
    assert!(run.aborted.is_none());
    assert!((run.final_time - 0.04).abs() < 1e-12);
    assert_eq!(run.estimate.steps, run.steps.len());
    (run.steps, legal)
}

#[test]
fn adaptive_runs_are_legal_and_deterministic() {
    let (a, legal) = short_run(true);
    assert_eq!(a.len(), 4);
    assert!(legal.iter().all(|ok| *ok));
    let (b, _) = short_run(true);
    let key = |s: &[AdaptiveStepRecord]| s.iter().map(|r| (r.dofs, r.cells, r.dofs_after, r.alpha.to_bits())).collect::<Vec<_>>();
    assert_eq!(key(&a), key(&b));
}

#[test]
fn without_coarsening_meshes_only_grow() {
    let (steps, legal) = short_run(false);
    assert!(legal.iter().all(|ok| *ok));
    for w in steps.windows(2) {
        assert!(w[1].dofs >= w[0].dofs);
    }
    assert!(steps.iter().all(|s| s.dofs_after == s.dofs));
}

#[test]
fn invalid_configs_rejected() {
    for cfg in [
        AmrConfig {
            tol_x: 0.0,
            ..Default::default()
        },
        AmrConfig {
            bulk_theta: 1.0,
            ..Default::default()
        },
        AmrConfig {
            max_dofs: Some(0),
            ..Default::default()
        },
        AmrConfig {
            h_min: -1.0,
            ..Default::default()
        },
    ] {
        assert!(cfg.validate().is_err());
    }
    let problem = Problem::new(parameter_set(1).unwrap());
    let cfg = AdaptiveRunConfig::new(AmrConfig::default(), 2, 0, 0.0, 1.0);
    assert!(run_adaptive(&problem, &cfg, None).is_err());
}
