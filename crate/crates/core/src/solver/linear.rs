use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::SparseOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LinearMethod {
    /// Restarted GMRES, falling back to dense LU for small systems.
    #[default]
    Auto,
    Gmres,
    /// Conjugate gradients; symmetric positive definite systems only.
    Cg,
    DenseLu,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOptions {
    pub method: LinearMethod,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Largest dimension for which dense LU is attempted.
    pub dense_limit: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            method: LinearMethod::Auto,
            rel_tol: 1e-10,
            max_iter: 2000,
            restart: 60,
            dense_limit: 3000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
    pub method: LinearMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn jacobi(a: &SparseOperator) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 && d.is_finite() { 1.0 / d } else { 1.0 })
        .collect()
}

fn residual(a: &SparseOperator, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

/// Solve `A x = rhs` to relative residual `opts.rel_tol`.
pub fn linear_solve(a: &SparseOperator, rhs: &[f64], opts: &LinearOptions) -> Result<(Vec<f64>, LinearSolveInfo)> {
    assert_eq!(rhs.len(), a.dim(), "right-hand side has the wrong length");
    match opts.method {
        LinearMethod::Gmres => gmres(a, rhs, opts),
        LinearMethod::Cg => cg(a, rhs, opts),
        LinearMethod::DenseLu => dense_lu(a, rhs),
        LinearMethod::Auto => match gmres(a, rhs, opts) {
            Ok(r) => Ok(r),
            Err(e) if a.dim() <= opts.dense_limit => {
                log::debug!("GMRES failed ({e}); retrying with dense LU");
                dense_lu(a, rhs)
            }
            Err(e) => Err(e),
        },
    }
}

/// Restarted GMRES with right Jacobi preconditioning.
pub fn gmres(a: &SparseOperator, b: &[f64], opts: &LinearOptions) -> Result<(Vec<f64>, LinearSolveInfo)> {
    let n = a.dim();
    let bnorm = norm(b);
    let info = |iterations, relative_residual| LinearSolveInfo {
        iterations,
        relative_residual,
        method: LinearMethod::Gmres,
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], info(0, 0.0)));
    }
    let dinv = jacobi(a);
    let m = opts.restart.max(1).min(n.max(1));
    let mut x = vec![0.0; n];
    let mut total = 0;
    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    loop {
        let cycle_start = rnorm;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        let mut k = 0;
        while k < m && total < opts.max_iter {
            for i in 0..n {
                z[i] = dinv[i] * basis[k][i];
            }
            a.matvec_into(&z, &mut w);
            for (j, q) in basis.iter().enumerate() {
                let hj = dot(&w, q);
                h[j][k] = hj;
                for i in 0..n {
                    w[i] -= hj * q[i];
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            if g[k].abs() <= opts.rel_tol * bnorm * 0.5 || hn <= 1e-300 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] += yj * basis[j][i];
            }
        }
        for i in 0..n {
            x[i] += dinv[i] * update[i];
        }
        r = residual(a, &x, b);
        rnorm = norm(&r);
        let rel = rnorm / bnorm;
        if !rel.is_finite() {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: rel,
                reason: "breakdown (non-finite residual)".into(),
            });
        }
        if rel <= opts.rel_tol {
            return Ok((x, info(total, rel)));
        }
        if total >= opts.max_iter {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: rel,
                reason: "iteration limit reached".into(),
            });
        }
        if rnorm > 0.999 * cycle_start {
            return Err(Error::LinearSolver {
                iterations: total,
                residual: rel,
                reason: "stagnation".into(),
            });
        }
    }
}

/// Jacobi-preconditioned conjugate gradients.
pub fn cg(a: &SparseOperator, b: &[f64], opts: &LinearOptions) -> Result<(Vec<f64>, LinearSolveInfo)> {
    let n = a.dim();
    let bnorm = norm(b);
    let info = |iterations, relative_residual| LinearSolveInfo {
        iterations,
        relative_residual,
        method: LinearMethod::Cg,
    };
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], info(0, 0.0)));
    }
    let dinv = jacobi(a);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    for it in 1..=opts.max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolver {
                iterations: it,
                residual: norm(&r) / bnorm,
                reason: "breakdown (operator not positive definite)".into(),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / bnorm;
        if rel <= opts.rel_tol {
            let true_rel = norm(&residual(a, &x, b)) / bnorm;
            if true_rel <= opts.rel_tol * 10.0 {
                return Ok((x, info(it, true_rel)));
            }
        }
        if rel < 0.999 * best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                return Err(Error::LinearSolver {
                    iterations: it,
                    residual: rel,
                    reason: "stagnation".into(),
                });
            }
        }
        for i in 0..n {
            z[i] = dinv[i] * r[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::LinearSolver {
        iterations: opts.max_iter,
        residual: norm(&residual(a, &x, b)) / bnorm,
        reason: "iteration limit reached".into(),
    })
}

/// Dense LU with partial pivoting.
pub fn dense_lu(a: &SparseOperator, b: &[f64]) -> Result<(Vec<f64>, LinearSolveInfo)> {
    let n = a.dim();
    let m: DMatrix<f64> = a.to_dense();
    let lu = m.lu();
    let sol = lu.solve(&DVector::from_column_slice(b)).ok_or_else(|| Error::LinearSolver {
        iterations: 0,
        residual: f64::NAN,
        reason: "singular matrix in dense LU".into(),
    })?;
    let x: Vec<f64> = sol.iter().copied().collect();
    let bnorm = norm(b);
    let rel = if bnorm == 0.0 { 0.0 } else { norm(&residual(a, &x, b)) / bnorm };
    if !rel.is_finite() || rel > 1e-8 {
        return Err(Error::LinearSolver {
            iterations: 0,
            residual: rel,
            reason: "dense LU produced an inaccurate solution".into(),
        });
    }
    debug_assert_eq!(x.len(), n);
    Ok((
        x,
        LinearSolveInfo {
            iterations: 0,
            relative_residual: rel,
            method: LinearMethod::DenseLu,
        },
    ))
}
