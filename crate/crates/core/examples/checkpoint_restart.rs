//! Stop a uniform run halfway, checkpoint it and continue from the files.

use invadapt::fem::FeSpace;
use invadapt::io::{read_checkpoint, write_checkpoint};
use invadapt::mesh::build_structured_cube;
use invadapt::model::{parameter_set, Problem};
use invadapt::solver::{time_loop, TimeLoopOptions};

fn main() -> invadapt::Result<()> {
    let dir = std::env::temp_dir().join("invadapt-checkpoint");
    let problem = Problem::new(parameter_set(2)?);
    let space = FeSpace::from_mesh(build_structured_cube(6)?)?;
    let z0 = problem.initial_state(space.mesh());
    let opts = TimeLoopOptions::default();

    let full = time_loop(&space, &problem, z0.clone(), 0.1, 0.01, &opts, None)?;
    let half = time_loop(&space, &problem, z0, 0.05, 0.01, &opts, None)?;
    let manifest = write_checkpoint(&dir, "half", space.mesh(), &half.final_state, half.final_time)?;
    println!("checkpoint at t={} in {}", half.final_time, manifest.display());

    let (mesh, z, t) = read_checkpoint(&manifest)?;
    let space = FeSpace::from_mesh(mesh)?;
    let resumed = time_loop(&space, &problem, z, 0.1, 0.01, &TimeLoopOptions { t_start: t, ..opts }, None)?;
    let diff = (0..3)
        .flat_map(|f| resumed.final_state.field(f).iter().zip(full.final_state.field(f)).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    println!("max difference to the uninterrupted run: {diff:.2e}");
    Ok(())
}
