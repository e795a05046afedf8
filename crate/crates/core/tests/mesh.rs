use invadapt::fem::{FeSpace, StateFields};
use invadapt::mesh::{
    build_structured_cube, build_transfer, check_nested, geometry_tables, CoarsenOptions, PointLocator, RefineOptions,
    SimplicialMesh,
};
use invadapt::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn unit_cube_counts() {
    let m = build_structured_cube(1).unwrap();
    assert_eq!((m.num_vertices(), m.num_cells()), (8, 6));
    assert_eq!(m.faces().iter().filter(|f| f.is_boundary()).count(), 12);
    for n in 1..=6 {
        let m = build_structured_cube(n).unwrap();
        assert_eq!(m.num_vertices(), (n + 1).pow(3));
        assert_eq!(m.num_cells(), 6 * n.pow(3));
        assert!(m.audit().is_valid());
    }
}

#[test]
fn zero_subdivisions_rejected() {
    assert!(matches!(build_structured_cube(0), Err(Error::DegenerateInput(_))));
}

#[test]
fn kuhn_volumes_equal() {
    let m = build_structured_cube(3).unwrap();
    let g = geometry_tables(&m).unwrap();
    for c in &g.cells {
        assert!((c.volume - 1.0 / 162.0).abs() < 1e-15);
    }
    assert!((g.total_volume() - 1.0).abs() < 1e-14);
}

#[test]
fn three_bisections_halve_the_mesh_size() {
    let root = build_structured_cube(4).unwrap();
    let fine = root.refine_uniform(3);
    assert_eq!(fine.num_vertices(), 729);
    assert_eq!(fine.num_cells(), 8 * root.num_cells());
    assert!((fine.min_diameter() - 0.5 * root.min_diameter()).abs() < 1e-14);
    let level9 = root.refine_uniform(9);
    assert_eq!((level9.num_vertices(), level9.num_cells()), (35937, 196608));
}

#[test]
fn shape_regularity_does_not_degrade() {
    let root = build_structured_cube(1).unwrap();
    let r3 = root.refine_uniform(3).max_shape_ratio();
    let r6 = root.refine_uniform(6).max_shape_ratio();
    let r9 = root.refine_uniform(9).max_shape_ratio();
    assert!((r6 - r3).abs() < 1e-10 && (r9 - r3).abs() < 1e-10, "{r3} {r6} {r9}");
}

#[test]
fn local_refinement_conforms() {
    let m = build_structured_cube(2).unwrap();
    let (fine, stats) = m.refine_with(&[0], &RefineOptions { h_min: 0.0 });
    assert_eq!(stats.marked, 1);
    assert!(stats.bisections >= 1);
    assert!(fine.num_cells() > m.num_cells());
    assert!(fine.audit().is_valid());
}

#[test]
fn floor_blocks_refinement() {
    let m = build_structured_cube(2).unwrap();
    let h = m.diameter(0);
    assert!(m.refinable(0, 0.5 * h));
    assert!(!m.refinable(0, h));
    let (same, stats) = m.refine_with(&[0, 1, 2], &RefineOptions { h_min: 2.0 * h });
    assert_eq!(stats.skipped_by_floor, 3);
    assert_eq!(stats.bisections, 0);
    assert_eq!(same.num_cells(), m.num_cells());
}

#[test]
fn refine_then_coarsen_restores_root() {
    let m = build_structured_cube(2).unwrap();
    let fine = m.refine_uniform(2);
    let all: Vec<usize> = (0..fine.num_cells()).collect();
    let (once, _) = fine.coarsen_with(&all, &CoarsenOptions { min_level: 0 });
    let all: Vec<usize> = (0..once.num_cells()).collect();
    let (back, _) = once.coarsen_with(&all, &CoarsenOptions { min_level: 0 });
    assert_eq!(back.num_cells(), m.num_cells());
    assert_eq!(back.num_vertices(), m.num_vertices());
    assert!(back.audit().is_valid());
}

#[test]
fn min_level_stops_coarsening() {
    let fine = build_structured_cube(1).unwrap().refine_uniform(2);
    let all: Vec<usize> = (0..fine.num_cells()).collect();
    let (kept, stats) = fine.coarsen_with(&all, &CoarsenOptions { min_level: 2 });
    assert_eq!(stats.merged_pairs, 0);
    assert_eq!(kept.num_cells(), fine.num_cells());
}

#[test]
fn refinement_is_deterministic() {
    let m = build_structured_cube(2).unwrap();
    let marks = [3, 17, 40];
    let a = m.refine(&marks);
    let b = m.refine(&marks);
    assert_eq!(a.canonical_cells(), b.canonical_cells());
}

#[test]
fn hierarchies_are_nested() {
    let a = build_structured_cube(4).unwrap();
    let b = build_structured_cube(4).unwrap().refine_uniform(3);
    assert!(check_nested(&a, &b).is_ok());
    let c = build_structured_cube(3).unwrap();
    assert!(matches!(check_nested(&a, &c), Err(Error::NonNested(_))));
    assert!(build_transfer(&c, &a).is_err());
}

#[test]
fn transfer_is_exact_for_p1_fields() {
    let coarse = build_structured_cube(2).unwrap();
    let fine = coarse.refine(&[0, 5, 11]).refine(&[1, 2, 3, 30]);
    let field = |x: &[f64; 3]| {
        let s = x[0] + x[1] + x[2];
        [s * s, (3.0 * x[0]).sin(), x[2].exp()]
    };
    let state = StateFields::interpolate(&coarse, field);
    let map = build_transfer(&coarse, &fine).unwrap();
    let moved = state.transfer(&map).unwrap();
    let (lc, lf) = (PointLocator::new(&coarse), PointLocator::new(&fine));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        for f in 0..3 {
            let a = lc.evaluate(state.field(f), &p).unwrap();
            let b = lf.evaluate(moved.field(f), &p).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b} at {p:?}");
        }
    }
}

#[test]
fn transfer_rejects_foreign_state() {
    let a = build_structured_cube(2).unwrap();
    let b = a.refine(&[0]);
    let map = build_transfer(&a, &b).unwrap();
    let wrong = StateFields::constant(&b, 0.0, 1.0, 0.0);
    assert!(wrong.transfer(&map).is_err());
}

#[test]
fn geometry_rejects_nothing_on_valid_meshes() {
    let m = build_structured_cube(2).unwrap().refine(&[4, 9]);
    let s = FeSpace::from_mesh(m).unwrap();
    let g = s.geometry();
    for f in &g.faces {
        assert!((f.normal.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

fn apply(mesh: SimplicialMesh, ops: &[(bool, Vec<usize>)]) -> SimplicialMesh {
    let mut mesh = mesh;
    for (refine, picks) in ops {
        let n = mesh.num_cells();
        let marked: Vec<usize> = picks.iter().map(|p| p % n).collect();
        mesh = if *refine {
            mesh.refine_with(&marked, &RefineOptions { h_min: 0.0 }).0
        } else {
            mesh.coarsen_with(&marked, &CoarsenOptions { min_level: 0 }).0
        };
        let a = mesh.audit();
        assert!(a.is_conforming(), "{a:?}");
        assert!(a.min_volume > 0.0);
        assert!((a.total_volume - 1.0).abs() <= 1e-12);
    }
    mesh
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_sequences_stay_legal(
        n in 1usize..=2,
        ops in prop::collection::vec((any::<bool>(), prop::collection::vec(0usize..10_000, 1..8)), 1..8),
    ) {
        let m = apply(build_structured_cube(n).unwrap(), &ops);
        prop_assert!(m.audit().is_valid());
        let levels_ok = (0..m.num_cells()).all(|c| m.diameter(c) > 0.0);
        prop_assert!(levels_ok);
    }

    #[test]
    fn vertex_counts_follow_euler(ops in prop::collection::vec((Just(true), prop::collection::vec(0usize..10_000, 1..6)), 1..5)) {
        // Closed triangulated ball: V - E + F - T = 1.
        let m = apply(build_structured_cube(1).unwrap(), &ops);
        let mut edges = std::collections::HashSet::new();
        for c in 0..m.num_cells() {
            let v = m.cell_vertices(c);
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.insert((v[a].min(v[b]), v[a].max(v[b])));
                }
            }
        }
        let chi = m.num_vertices() as i64 - edges.len() as i64 + m.faces().len() as i64 - m.num_cells() as i64;
        prop_assert_eq!(chi, 1);
    }
}
