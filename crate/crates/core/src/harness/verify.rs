use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ErrorNorm, Experiment, RunConfig};
use super::output::Check;
use super::study::{compute_eoc, run_uniform_study};
use crate::error::Result;
use crate::estimator::{estimate, EstimatorOptions};
use crate::fem::{jacobian_directional_error, FeSpace, StateFields};
use crate::mesh::build_structured_cube;
use crate::model::{parameter_set, Problem};

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Random positive state near the physical range.
pub fn random_state(mesh: &crate::mesh::SimplicialMesh, rng: &mut impl Rng) -> StateFields {
    let n = mesh.num_vertices();
    let mut draw = |lo: f64, hi: f64| (0..n).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>();
    let (u, v, w) = (draw(0.0, 1.0), draw(0.0, 1.0), draw(0.0, 0.5));
    StateFields::new(mesh, u, v, w).expect("finite by construction")
}

/// Quick self-checks: mesh counts, Jacobian consistency, estimator
/// zero-consistency and a short manufactured-solution convergence test.
pub fn run_verification(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let m = build_structured_cube(20)?;
    checks.push(check(
        "mesh-counts",
        m.num_vertices() == 9261 && m.num_cells() == 48000,
        format!("{} nodes, {} cells", m.num_vertices(), m.num_cells()),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = FeSpace::from_mesh(build_structured_cube(2)?)?;
    let mut worst: f64 = 0.0;
    for set in [1, 2] {
        let problem = Problem::new(parameter_set(set)?);
        for _ in 0..5 {
            let s = random_state(space.mesh(), &mut rng);
            let p = random_state(space.mesh(), &mut rng);
            let d: Vec<f64> = (0..3 * space.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
            worst = worst.max(jacobian_directional_error(&space, &problem, &s, &p, 0.01, 0.01, &d)?);
        }
    }
    checks.push(check("jacobian", worst < 1e-6, format!("max relative error {worst:.2e}")));

    let mut largest: f64 = 0.0;
    for set in [1, 2] {
        let problem = Problem::steady(parameter_set(set)?);
        let s = problem.initial_state(space.mesh());
        let r = estimate(&space, &problem, &s, &s, 0.01, 0.01, &EstimatorOptions::default())?;
        largest = largest.max(r.alpha).max(r.theta).max(r.gamma).max(r.kappa);
    }
    checks.push(check("estimator-zero", largest < 1e-14, format!("largest indicator {largest:.2e}")));

    let cfg = RunConfig {
        experiment: Experiment::MmsSpatial,
        levels: vec![0, 3],
        tau: 5e-4,
        t_final: 0.01,
        error_norm: ErrorNorm::U,
        ..RunConfig::default()
    };
    let rows = run_uniform_study(&cfg, None)?;
    let eoc = compute_eoc(&rows)?;
    let order = eoc.pairs[0].unwrap_or(f64::NAN);
    checks.push(check("mms-spatial", order >= 1.8, format!("EOC {order:.3} between 125 and 729 nodes")));
    Ok(checks)
}
