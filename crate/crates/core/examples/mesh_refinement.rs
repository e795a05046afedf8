//! Refine a Kuhn cube towards the origin, coarsen it back and write the
//! meshes as VTU files.

use invadapt::mesh::{build_structured_cube, CoarsenOptions, RefineOptions};

fn main() -> invadapt::Result<()> {
    let out = std::env::temp_dir().join("invadapt-mesh");
    std::fs::create_dir_all(&out).unwrap();
    let mut mesh = build_structured_cube(4)?;
    println!("root: {} nodes, {} tets", mesh.num_vertices(), mesh.num_cells());

    for step in 0..6 {
        let near: Vec<usize> = (0..mesh.num_cells())
            .filter(|&c| mesh.cell_points(c).iter().any(|p| p.iter().map(|x| x * x).sum::<f64>() < 0.04))
            .collect();
        let (fine, stats) = mesh.refine_with(&near, &RefineOptions { h_min: 0.02 });
        mesh = fine;
        let a = mesh.audit();
        println!(
            "refine {step}: marked {:>4}, closure {:>4}, {:>6} tets, min h {:.4}, volume {:.15}, conforming {}",
            stats.marked,
            stats.closure_bisections,
            mesh.num_cells(),
            mesh.min_diameter(),
            a.total_volume,
            a.is_conforming()
        );
        let levels: Vec<f64> = (0..mesh.num_cells()).map(|c| mesh.level(c) as f64).collect();
        invadapt::io::write_vtu(out.join(format!("refine_{step}.vtu")), &mesh, None, &[("level", &levels)])?;
    }

    loop {
        let all: Vec<usize> = (0..mesh.num_cells()).collect();
        let (coarse, stats) = mesh.coarsen_with(&all, &CoarsenOptions { min_level: 0 });
        if stats.merged_pairs == 0 {
            break;
        }
        mesh = coarse;
        println!("coarsen: merged {:>5} pairs, {:>6} tets", stats.merged_pairs, mesh.num_cells());
    }
    println!("max shape ratio {:.3}; files in {}", mesh.max_shape_ratio(), out.display());
    Ok(())
}
