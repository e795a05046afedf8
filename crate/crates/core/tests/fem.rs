mod common;

use approx::assert_relative_eq;
use invadapt::fem::quadrature::{tet_rule, tri_rule};
use invadapt::fem::{
    assemble_diffusion, assemble_haptotaxis, assemble_jacobian_with, assemble_mass, assemble_residual, error_norms_fn,
    jacobian_directional_error, l2_project_fn, norms, FeSpace, JacobianMode, SparseOperator, StateFields,
};
use invadapt::mesh::build_structured_cube;
use invadapt::model::{parameter_set, FnDiffusion, Problem};
use invadapt::solver::linear::{cg, dense_lu, gmres};
use invadapt::solver::{LinearMethod, LinearOptions};
use invadapt::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[test]
fn tetrahedral_rules_integrate_monomials() {
    for degree in [1, 2, 5] {
        let rule = tet_rule(degree);
        assert_relative_eq!(rule.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let d = degree - a - b - c;
                    let exact = factorial(a) * factorial(b) * factorial(c) * factorial(d) * 6.0 / factorial(degree + 3);
                    let q: f64 = rule
                        .iter()
                        .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32) * l[3].powi(d as i32))
                        .sum();
                    assert!((q - exact).abs() < 1e-14, "degree {degree} ({a},{b},{c},{d}): {q} vs {exact}");
                }
            }
        }
    }
}

#[test]
fn triangle_rules_integrate_monomials() {
    for degree in [2, 5] {
        let rule = tri_rule(degree);
        for a in 0..=degree {
            for b in 0..=degree - a {
                let c = degree - a - b;
                let exact = factorial(a) * factorial(b) * factorial(c) * 2.0 / factorial(degree + 2);
                let q: f64 = rule
                    .iter()
                    .map(|(l, w)| w * l[0].powi(a as i32) * l[1].powi(b as i32) * l[2].powi(c as i32))
                    .sum();
                assert!((q - exact).abs() < 1e-14);
            }
        }
    }
}

fn space(n: usize) -> FeSpace {
    FeSpace::from_mesh(build_structured_cube(n).unwrap()).unwrap()
}

#[test]
fn mass_and_stiffness_identities() {
    let s = space(3);
    let m = assemble_mass(&s);
    assert!(m.is_symmetric(0.0));
    assert_relative_eq!(m.values().iter().sum::<f64>(), 1.0, epsilon = 1e-13);
    let k = assemble_diffusion(&s, |_, _, _| 1.0).unwrap();
    assert!(k.is_symmetric(1e-15));
    for r in k.row_sums() {
        assert!(r.abs() < 1e-13);
    }
    // x^T K x = int |grad x|^2 for the linear field x + 2y - z.
    let x: Vec<f64> = s.mesh().vertices().iter().map(|p| p[0] + 2.0 * p[1] - p[2]).collect();
    let kx = k.matvec(&x);
    assert_relative_eq!(x.iter().zip(&kx).map(|(a, b)| a * b).sum::<f64>(), 6.0, epsilon = 1e-12);
}

#[test]
fn haptotaxis_columns_sum_to_zero() {
    let s = space(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let st = common::random_state(s.mesh(), &mut rng);
    let h = assemble_haptotaxis(&s, &st, &parameter_set(1).unwrap()).unwrap();
    let d = h.to_dense();
    for j in 0..d.ncols() {
        assert!(d.column(j).sum().abs() < 1e-15);
    }
}

#[test]
fn norms_of_linear_fields() {
    let s = space(4);
    let x: Vec<f64> = s.mesh().vertices().iter().map(|p| p[0]).collect();
    let n = norms(&s, &x);
    assert_relative_eq!(n.l2, (1.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    assert_relative_eq!(n.h1_semi, 1.0, epsilon = 1e-14);
    assert_relative_eq!(n.h1, (4.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    let e = error_norms_fn(&s, &x, |p| p[0], |_| [1.0, 0.0, 0.0]);
    assert!(e.l2 < 1e-15 && e.h1_semi < 1e-14);
}

#[test]
fn projection_reproduces_p1_functions() {
    let s = space(3);
    let p = l2_project_fn(&s, |x| 1.0 + x[0] - 3.0 * x[2]).unwrap();
    for (v, x) in p.iter().zip(s.mesh().vertices()) {
        assert!((v - (1.0 + x[0] - 3.0 * x[2])).abs() < 1e-11);
    }
}

#[test]
fn rest_state_has_zero_residual() {
    let s = space(3);
    for set in [1, 2] {
        let problem = Problem::steady(parameter_set(set).unwrap());
        let z = problem.initial_state(s.mesh());
        let r = assemble_residual(&s, &problem, &z, &z, 0.01, 0.01).unwrap();
        assert_eq!(r.norm(), 0.0);
    }
}

#[test]
fn nonpositive_step_rejected() {
    let s = space(1);
    let z = StateFields::constant(s.mesh(), 0.0, 1.0, 0.0);
    let problem = Problem::new(parameter_set(1).unwrap());
    assert!(matches!(assemble_residual(&s, &problem, &z, &z, 0.0, 0.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn missing_derivative_needs_finite_differences() {
    let s = space(2);
    let params = parameter_set(1).unwrap().with_d1(FnDiffusion::new("no-grad", |u, _, _| 1e-3 * (1.0 + u * u)));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let z = common::random_state(s.mesh(), &mut rng);
    let analytic = assemble_jacobian_with(&s, &z, &z, 0.01, &params, JacobianMode::Analytic);
    assert!(matches!(analytic, Err(Error::MissingDerivative("d1"))));
    let fd = assemble_jacobian_with(&s, &z, &z, 0.01, &params, JacobianMode::FiniteDifference).unwrap();
    let exact = parameter_set(1)
        .unwrap()
        .with_d1(FnDiffusion::new("grad", |u, _, _| 1e-3 * (1.0 + u * u)).with_gradient(|u, _, _| [2e-3 * u, 0.0, 0.0]));
    let an = assemble_jacobian_with(&s, &z, &z, 0.01, &exact, JacobianMode::Analytic).unwrap();
    let diff = (fd.to_dense() - an.to_dense()).norm() / an.to_dense().norm();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn non_finite_coefficient_is_reported() {
    let s = space(1);
    let params = parameter_set(1).unwrap().with_d1(FnDiffusion::new("nan", |_, _, _| f64::NAN));
    let problem = Problem::new(params);
    let z = StateFields::constant(s.mesh(), 0.1, 0.9, 0.0);
    assert!(matches!(
        assemble_residual(&s, &problem, &z, &z, 0.1, 0.1),
        Err(Error::NonFiniteCoefficient { .. })
    ));
}

fn test_system(n: usize, symmetric: bool) -> (SparseOperator, Vec<f64>) {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 4.0));
        if i + 1 < n {
            t.push((i, i + 1, -1.0));
            t.push((i + 1, i, if symmetric { -1.0 } else { -0.5 }));
        }
    }
    let a = SparseOperator::from_triplets(n, &t);
    let b = (0..n).map(|i| (i as f64).sin()).collect();
    (a, b)
}

fn residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt() / b.iter().map(|q| q * q).sum::<f64>().sqrt()
}

#[test]
fn krylov_and_direct_solvers_agree() {
    let (a, b) = test_system(200, false);
    let opts = LinearOptions {
        method: LinearMethod::Gmres,
        ..Default::default()
    };
    let (xg, info) = gmres(&a, &b, &opts).unwrap();
    assert!(info.relative_residual <= 1e-10);
    let (xd, _) = dense_lu(&a, &b).unwrap();
    assert!(residual(&a, &xg, &b) < 1e-9);
    assert!(xg.iter().zip(&xd).all(|(p, q)| (p - q).abs() < 1e-9));
    let (s, bs) = test_system(200, true);
    let (xc, _) = cg(&s, &bs, &opts).unwrap();
    assert!(residual(&s, &xc, &bs) < 1e-9);
}

#[test]
fn singular_system_fails_cleanly() {
    let a = SparseOperator::from_triplets(3, &[(0, 0, 1.0), (1, 1, 1.0)]);
    assert!(dense_lu(&a, &[1.0, 1.0, 1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn jacobian_matches_difference_quotient(seed in any::<u64>(), set in 1u32..=2, tau in 1e-3f64..0.2) {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = Problem::new(parameter_set(set).unwrap());
        let z = common::random_state(s.mesh(), &mut rng);
        let p = common::random_state(s.mesh(), &mut rng);
        let d: Vec<f64> = (0..3 * s.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e = jacobian_directional_error(&s, &problem, &z, &p, tau, 0.0, &d).unwrap();
        prop_assert!(e < 1e-6, "{}", e);
    }

    #[test]
    fn mass_quadratic_form_is_l2_norm(seed in any::<u64>()) {
        let s = space(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..s.num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = assemble_mass(&s);
        let q: f64 = x.iter().zip(m.matvec(&x)).map(|(a, b)| a * b).sum();
        prop_assert!((q.sqrt() - norms(&s, &x).l2).abs() < 1e-13);
    }
}
