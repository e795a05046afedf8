use rayon::prelude::*;

use super::quadrature::tet_rule;
use super::{FeSpace, SparseOperator, StateFields};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::model::{reaction_derivatives, reaction_terms, JacobianMode, ModelParams, Problem};
use crate::solver::linear::{cg, LinearMethod, LinearOptions};
use crate::vec3::{self, Vec3};

const CHUNK: usize = 2048;

/// Compute per-cell contributions in parallel chunks and scatter them in
/// cell order, so results do not depend on the thread count.
fn for_each_cell<L, C, S>(ncells: usize, compute: C, mut scatter: S) -> Result<()>
where
    L: Send,
    C: Fn(usize) -> Result<L> + Sync,
    S: FnMut(usize, L),
{
    let mut start = 0;
    while start < ncells {
        let end = (start + CHUNK).min(ncells);
        let locals: Vec<L> = (start..end).into_par_iter().map(&compute).collect::<Result<_>>()?;
        for (k, l) in locals.into_iter().enumerate() {
            scatter(start + k, l);
        }
        start = end;
    }
    Ok(())
}

#[inline]
fn nodal4(field: &[f64], v: &[usize; 4]) -> [f64; 4] {
    [field[v[0]], field[v[1]], field[v[2]], field[v[3]]]
}

#[inline]
fn eval(c: &[f64; 4], l: &[f64; 4]) -> f64 {
    c[0] * l[0] + c[1] * l[1] + c[2] * l[2] + c[3] * l[3]
}

#[inline]
fn grad(c: &[f64; 4], g: &[Vec3; 4]) -> Vec3 {
    let mut r = [0.0; 3];
    for k in 0..4 {
        for d in 0..3 {
            r[d] += c[k] * g[k][d];
        }
    }
    r
}

/// Consistent mass matrix (exact).
pub fn assemble_mass(space: &FeSpace) -> SparseOperator {
    let mut m = SparseOperator::zeros(space.pattern().clone());
    let vals = m.values_mut();
    for (c, cg) in space.geometry().cells.iter().enumerate() {
        let s = cg.volume / 20.0;
        for a in 0..4 {
            for b in 0..4 {
                vals[space.local_position(c, a, b)] += if a == b { 2.0 * s } else { s };
            }
        }
    }
    m
}

/// Stiffness matrix `int coeff grad(phi_j) . grad(phi_i)` with the
/// coefficient sampled at degree-2 quadrature points. The evaluator receives
/// the cell, barycentric point and physical point.
pub fn assemble_diffusion<F>(space: &FeSpace, coeff: F) -> Result<SparseOperator>
where
    F: Fn(usize, &[f64; 4], &Point) -> f64 + Sync,
{
    let mesh = space.mesh();
    let rule = tet_rule(2);
    let mut k = SparseOperator::zeros(space.pattern().clone());
    let vals = k.values_mut();
    for_each_cell(
        mesh.num_cells(),
        |c| {
            let cg = &space.geometry().cells[c];
            let pts = mesh.cell_points(c);
            let mut avg = 0.0;
            for (l, w) in rule.iter() {
                let x = vec3::combine4(&pts, l);
                let d = coeff(c, l, &x);
                if !d.is_finite() {
                    return Err(Error::NonFiniteCoefficient { element: c });
                }
                avg += w * d;
            }
            let mut local = [[0.0; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    local[a][b] = avg * cg.volume * vec3::dot(&cg.grads[a], &cg.grads[b]);
                }
            }
            Ok(local)
        },
        |c, local| {
            for a in 0..4 {
                for b in 0..4 {
                    vals[space.local_position(c, a, b)] += local[a][b];
                }
            }
        },
    )?;
    Ok(k)
}

/// Haptotaxis operator acting on u: entry `(i, j) = int chi(v_h) phi_j grad v_h . grad phi_i`.
pub fn assemble_haptotaxis(space: &FeSpace, state: &StateFields, params: &ModelParams) -> Result<SparseOperator> {
    state.check_on(space.mesh())?;
    let mesh = space.mesh();
    let rule = tet_rule(5);
    let mut h = SparseOperator::zeros(space.pattern().clone());
    let vals = h.values_mut();
    for_each_cell(
        mesh.num_cells(),
        |c| {
            let cg = &space.geometry().cells[c];
            let vv = nodal4(&state.v, &mesh.cell_vertices(c));
            let gv = grad(&vv, &cg.grads);
            let mut phi_chi = [0.0; 4];
            for (l, w) in rule.iter() {
                let chi = params.chi.value(eval(&vv, l));
                if !chi.is_finite() {
                    return Err(Error::NonFiniteCoefficient { element: c });
                }
                for b in 0..4 {
                    phi_chi[b] += w * chi * l[b];
                }
            }
            let mut local = [[0.0; 4]; 4];
            for a in 0..4 {
                let gva = vec3::dot(&gv, &cg.grads[a]);
                for b in 0..4 {
                    local[a][b] = cg.volume * phi_chi[b] * gva;
                }
            }
            Ok(local)
        },
        |c, local| {
            for a in 0..4 {
                for b in 0..4 {
                    vals[space.local_position(c, a, b)] += local[a][b];
                }
            }
        },
    )?;
    Ok(h)
}

/// Nodal residual of the backward-Euler step, one vector per equation.
#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl Residual {
    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.u.len());
        for i in 0..self.u.len() {
            x.extend([self.u[i], self.v[i], self.w[i]]);
        }
        x
    }

    pub fn norm(&self) -> f64 {
        self.u.iter().chain(&self.v).chain(&self.w).map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Residual of the unforced system for the step `prev -> state` of size `tau`.
pub fn assemble_reaction_residuals(
    space: &FeSpace,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    params: &ModelParams,
) -> Result<Residual> {
    assemble_residual(space, &Problem::new(params.clone()), state, prev, tau, 0.0)
}

fn check_step(space: &FeSpace, state: &StateFields, prev: &StateFields, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    state.check_on(space.mesh())?;
    prev.check_on(space.mesh())
}

/// Residual of the fully discrete system at the new time `t` (used for the
/// forcing only). All three equations are tested against every basis
/// function; boundary terms vanish under the zero-flux conditions.
pub fn assemble_residual(
    space: &FeSpace,
    problem: &Problem,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    t: f64,
) -> Result<Residual> {
    check_step(space, state, prev, tau)?;
    let p = &problem.params;
    let mesh = space.mesh();
    let rule = tet_rule(5);
    let n = mesh.num_vertices();
    let mut res = Residual {
        u: vec![0.0; n],
        v: vec![0.0; n],
        w: vec![0.0; n],
    };
    let forced = problem.forcing.is_some();
    for_each_cell(
        mesh.num_cells(),
        |c| {
            let cg = &space.geometry().cells[c];
            let vert = mesh.cell_vertices(c);
            let pts = mesh.cell_points(c);
            let (uu, vv, ww) = (nodal4(&state.u, &vert), nodal4(&state.v, &vert), nodal4(&state.w, &vert));
            let (up, vp, wp) = (nodal4(&prev.u, &vert), nodal4(&prev.v, &vert), nodal4(&prev.w, &vert));
            let (gu, gv, gw) = (grad(&uu, &cg.grads), grad(&vv, &cg.grads), grad(&ww, &cg.grads));
            let mut fu = [0.0; 4];
            let mut fv = [0.0; 4];
            let mut fw = [0.0; 4];
            for (l, wq) in rule.iter() {
                let (u, v, w) = (eval(&uu, l), eval(&vv, l), eval(&ww, l));
                let r = reaction_terms(u, v, w, p);
                let d1 = p.d1.value(u, v, w);
                if !(d1.is_finite() && r.g1.is_finite()) {
                    return Err(Error::NonFiniteCoefficient { element: c });
                }
                let s = if forced { problem.source(&vec3::combine4(&pts, l), t) } else { [0.0; 3] };
                let mu = (u - eval(&up, l)) / tau - r.g2 - s[0];
                let mv = (v - eval(&vp, l)) / tau - r.fv - s[1];
                let mw = (w - eval(&wp, l)) / tau - r.fw - s[2];
                let flux_u = [d1 * gu[0] - r.g1 * gv[0], d1 * gu[1] - r.g1 * gv[1], d1 * gu[2] - r.g1 * gv[2]];
                let wv = wq * cg.volume;
                for a in 0..4 {
                    fu[a] += wv * (mu * l[a] + vec3::dot(&flux_u, &cg.grads[a]));
                    fv[a] += wv * mv * l[a];
                    fw[a] += wv * (mw * l[a] + p.d2 * vec3::dot(&gw, &cg.grads[a]));
                }
            }
            Ok((fu, fv, fw))
        },
        |c, (fu, fv, fw)| {
            for (a, &i) in mesh.cell_vertices(c).iter().enumerate() {
                res.u[i] += fu[a];
                res.v[i] += fv[a];
                res.w[i] += fw[a];
            }
        },
    )?;
    Ok(res)
}

/// Analytic Jacobian of [`assemble_residual`] in interleaved ordering
/// (dof `3 * node + field`).
pub fn assemble_jacobian(
    space: &FeSpace,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    params: &ModelParams,
) -> Result<SparseOperator> {
    assemble_jacobian_with(space, state, prev, tau, params, JacobianMode::Analytic)
}

pub fn assemble_jacobian_with(
    space: &FeSpace,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    params: &ModelParams,
    mode: JacobianMode,
) -> Result<SparseOperator> {
    check_step(space, state, prev, tau)?;
    let p = params;
    let mesh = space.mesh();
    let rule = tet_rule(5);
    let mut jac = SparseOperator::zeros(space.block_pattern().clone());
    let vals = jac.values_mut();
    for_each_cell(
        mesh.num_cells(),
        |c| {
            let cg = &space.geometry().cells[c];
            let vert = mesh.cell_vertices(c);
            let (uu, vv, ww) = (nodal4(&state.u, &vert), nodal4(&state.v, &vert), nodal4(&state.w, &vert));
            let (gu, gv) = (grad(&uu, &cg.grads), grad(&vv, &cg.grads));
            let mut gg = [[0.0; 4]; 4];
            let mut gdu = [0.0; 4];
            let mut gdv = [0.0; 4];
            for a in 0..4 {
                gdu[a] = vec3::dot(&gu, &cg.grads[a]);
                gdv[a] = vec3::dot(&gv, &cg.grads[a]);
                for b in 0..4 {
                    gg[a][b] = vec3::dot(&cg.grads[a], &cg.grads[b]);
                }
            }
            // local[3a + f][3b + g]
            let mut local = [[0.0; 12]; 12];
            for (l, wq) in rule.iter() {
                let (u, v, w) = (eval(&uu, l), eval(&vv, l), eval(&ww, l));
                let d1 = p.d1.value(u, v, w);
                let dd1 = p.d1_gradient(u, v, w, mode)?;
                let r = reaction_terms(u, v, w, p);
                let dr = reaction_derivatives(u, v, w, p, mode)?;
                if !(d1.is_finite() && r.g1.is_finite()) {
                    return Err(Error::NonFiniteCoefficient { element: c });
                }
                let wv = wq * cg.volume;
                for a in 0..4 {
                    for b in 0..4 {
                        let mm = wv * l[a] * l[b];
                        let k = wv * gg[a][b];
                        let pu = wv * l[b] * gdu[a];
                        let pv = wv * l[b] * gdv[a];
                        let row_u = &mut local[3 * a];
                        row_u[3 * b] += mm / tau + d1 * k + dd1[0] * pu - dr.g1[0] * pv - dr.g2[0] * mm;
                        row_u[3 * b + 1] += dd1[1] * pu - dr.g1[1] * pv - r.g1 * k - dr.g2[1] * mm;
                        row_u[3 * b + 2] += dd1[2] * pu;
                        let row_v = &mut local[3 * a + 1];
                        row_v[3 * b] -= dr.fv[0] * mm;
                        row_v[3 * b + 1] += mm / tau - dr.fv[1] * mm;
                        row_v[3 * b + 2] -= dr.fv[2] * mm;
                        let row_w = &mut local[3 * a + 2];
                        row_w[3 * b] -= dr.fw[0] * mm;
                        row_w[3 * b + 2] += mm / tau + p.d2 * k - dr.fw[2] * mm;
                    }
                }
            }
            Ok(local)
        },
        |c, local| {
            for a in 0..4 {
                for f in 0..3 {
                    for b in 0..4 {
                        for g in 0..3 {
                            vals[space.block_position(c, a, f, b, g)] += local[3 * a + f][3 * b + g];
                        }
                    }
                }
            }
        },
    )?;
    Ok(jac)
}

/// Load vector `b_i = int f phi_i` with degree-5 quadrature.
pub fn load_vector<F>(space: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &[f64; 4], &Point) -> f64 + Sync,
{
    let mesh = space.mesh();
    let rule = tet_rule(5);
    let mut b = vec![0.0; mesh.num_vertices()];
    for_each_cell(
        mesh.num_cells(),
        |c| {
            let cg = &space.geometry().cells[c];
            let pts = mesh.cell_points(c);
            let mut loc = [0.0; 4];
            for (l, w) in rule.iter() {
                let val = f(c, l, &vec3::combine4(&pts, l));
                if !val.is_finite() {
                    return Err(Error::NonFiniteCoefficient { element: c });
                }
                for a in 0..4 {
                    loc[a] += w * cg.volume * val * l[a];
                }
            }
            Ok(loc)
        },
        |c, loc| {
            for (a, &i) in mesh.cell_vertices(c).iter().enumerate() {
                b[i] += loc[a];
            }
        },
    )?;
    Ok(b)
}

/// Global L2 projection onto the P1 space of a function given per cell
/// (cell index, barycentric point, physical point).
pub fn l2_project<F>(space: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &[f64; 4], &Point) -> f64 + Sync,
{
    let b = load_vector(space, f)?;
    let m = assemble_mass(space);
    let opts = LinearOptions {
        method: LinearMethod::Cg,
        rel_tol: 1e-14,
        max_iter: 5000,
        ..Default::default()
    };
    let (x, info) = cg(&m, &b, &opts)?;
    if info.relative_residual > 1e-12 {
        return Err(Error::LinearSolver {
            iterations: info.iterations,
            residual: info.relative_residual,
            reason: "mass-matrix solve did not reach 1e-12".into(),
        });
    }
    Ok(x)
}

/// L2 projection of a pointwise function.
pub fn l2_project_fn(space: &FeSpace, f: impl Fn(&Point) -> f64 + Sync) -> Result<Vec<f64>> {
    l2_project(space, |_, _, x| f(x))
}

/// Relative difference between `J d` and the central difference quotient of
/// the residual along `d` (step `h` scaled by the state magnitude).
pub fn jacobian_directional_error(
    space: &FeSpace,
    problem: &Problem,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    t: f64,
    direction: &[f64],
) -> Result<f64> {
    let x = state.to_interleaved();
    if direction.len() != x.len() {
        return Err(Error::InvalidArgument("direction has the wrong length".into()));
    }
    let jac = assemble_jacobian(space, state, prev, tau, &problem.params)?;
    let jd = jac.matvec(direction);
    let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let dnorm = direction.iter().map(|d| d * d).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let h = 1e-6 * scale / dnorm;
    let shifted = |s: f64| -> Result<Vec<f64>> {
        let y: Vec<f64> = x.iter().zip(direction).map(|(a, d)| a + s * d).collect();
        let st = StateFields::from_interleaved(state.mesh, &y);
        Ok(assemble_residual(space, problem, &st, prev, tau, t)?.to_interleaved())
    };
    let (fp, fm) = (shifted(h)?, shifted(-h)?);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..jd.len() {
        let fd = (fp[i] - fm[i]) / (2.0 * h);
        num += (fd - jd[i]).powi(2);
        den += jd[i].powi(2);
    }
    Ok((num / den.max(f64::MIN_POSITIVE)).sqrt())
}
