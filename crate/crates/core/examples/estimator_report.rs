//! One backward Euler step of the invasion model followed by the error
//! estimator: global indicators and the cells carrying the largest share.

use invadapt::estimator::{estimate, EstimatorOptions};
use invadapt::fem::FeSpace;
use invadapt::mesh::build_structured_cube;
use invadapt::model::{parameter_set, Problem};
use invadapt::solver::{newton_solve, NewtonOptions};

fn main() -> invadapt::Result<()> {
    let set: u32 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let problem = Problem::new(parameter_set(set)?);
    let space = FeSpace::from_mesh(build_structured_cube(8)?)?;
    let z0 = problem.initial_state(space.mesh());
    let tau = 0.01;
    let (z1, rec) = newton_solve(&space, &problem, &z0, tau, tau, &NewtonOptions::default())?;
    println!("newton: {} iterations, final residual {:.2e}", rec.k_n, rec.final_residual());

    let r = estimate(&space, &problem, &z1, &z0, tau, tau, &EstimatorOptions::default())?;
    println!("alpha {:.4e} (u {:.3e}, v {:.3e}, w {:.3e})", r.alpha, r.alpha_parts[0], r.alpha_parts[1], r.alpha_parts[2]);
    println!("theta {:.4e}  gamma {:.4e}  kappa {:.4e}", r.theta, r.gamma, r.kappa);
    println!("step contribution {:.4e}", r.step_total());

    let mut order: Vec<usize> = (0..r.marking.len()).collect();
    order.sort_by(|&a, &b| r.marking[b].total_cmp(&r.marking[a]));
    let total: f64 = r.marking.iter().sum();
    for &c in order.iter().take(5) {
        let p = space.mesh().cell_points(c);
        let centre: Vec<f64> = (0..3).map(|d| p.iter().map(|q| q[d]).sum::<f64>() / 4.0).collect();
        println!("cell {c:>5} at {centre:.3?}: {:.1}% of the spatial indicator", 100.0 * r.marking[c] / total);
    }
    Ok(())
}
