//! Short adaptive simulation with VTU snapshots of the mesh, the fields and
//! the marking indicator.

use invadapt::amr::{run_adaptive, AdaptiveRunConfig, AdaptiveStepRecord, AmrConfig};
use invadapt::estimator::EstimatorReport;
use invadapt::fem::{FeSpace, StateFields};
use invadapt::model::{parameter_set, Problem};

fn main() -> invadapt::Result<()> {
    env_logger::init();
    let out = std::env::temp_dir().join("invadapt-adaptive");
    std::fs::create_dir_all(&out).unwrap();
    let problem = Problem::new(parameter_set(1)?);
    let amr = AmrConfig {
        tol_x: 2e-3,
        min_level: 3,
        ..Default::default()
    };
    let cfg = AdaptiveRunConfig::new(amr, 4, 3, 0.01, 0.2);
    let mut written = 0;
    let mut snap = |rec: &AdaptiveStepRecord, space: &FeSpace, z: &StateFields, r: &EstimatorReport| {
        if rec.step.is_multiple_of(5) {
            let path = out.join(format!("step_{:04}.vtu", rec.step));
            invadapt::io::write_vtu(path, space.mesh(), Some(z), &[("indicator", &r.marking)]).unwrap();
            written += 1;
        }
    };
    let run = run_adaptive(&problem, &cfg, Some(&mut snap))?;
    for s in run.steps.iter().step_by(4) {
        println!("t={:.2} nodes {:>6} loops {} alpha {:.3e}", s.t, s.dofs, s.refine_loops, s.alpha);
    }
    println!(
        "{} steps in {:.1}s, estimate {:.4e}, {written} snapshots in {}",
        run.steps.len(),
        run.wall_seconds,
        run.estimate.estimate(),
        out.display()
    );
    Ok(())
}
