//! Spatial convergence against a manufactured solution on three nested
//! uniform meshes.

use invadapt::harness::{compute_eoc, error_exact, ConvergenceRow, ErrorNorm};
use invadapt::fem::FeSpace;
use invadapt::mesh::build_structured_cube;
use invadapt::model::{manufactured_case, parameter_set, Problem};
use invadapt::solver::{time_loop, TimeLoopOptions};

fn main() -> invadapt::Result<()> {
    let case = manufactured_case("A")?;
    let problem = Problem::manufactured(case.clone(), parameter_set(1)?)?;
    let (tau, t_final) = (1e-3, 0.02);
    let root = build_structured_cube(2)?;
    let mut rows = Vec::new();
    for level in [0, 3, 6] {
        let start = std::time::Instant::now();
        let space = FeSpace::from_mesh(root.refine_uniform(level))?;
        let z0 = problem.initial_state(space.mesh());
        let traj = time_loop(&space, &problem, z0, t_final, tau, &TimeLoopOptions::default(), None)?;
        let err = error_exact(&case, &space, &traj.final_state, traj.final_time, ErrorNorm::Composite);
        rows.push(ConvergenceRow {
            dofs: space.num_nodes(),
            l2_error: err,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        println!("{:>6} nodes  L2 error {err:.4e}", space.num_nodes());
    }
    let eoc = compute_eoc(&rows)?;
    for (i, p) in eoc.pairs.iter().enumerate() {
        println!("EOC_h {i}->{}: {:.3}", i + 1, p.unwrap_or(f64::NAN));
    }
    Ok(())
}
