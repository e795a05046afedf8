//! Residual a posteriori error indicators.
//!
//! For a step `prev -> state` of size `tau` the report holds
//!
//! * element residuals `h_K^2 ||rho_i^K||^2` and face residuals
//!   `h_E ||rho_i^E||^2` (the v equation has no face term), summed into `alpha`;
//! * coefficient data errors from replacing `d1` and `g1 = chi(v) u` by their
//!   P1 L2 projections, summed into `theta`;
//! * the temporal indicators `gamma = tau/3 (P1 + P2 + P3)`, where each `P_i`
//!   is the strong-form residual of the linearised operator applied to the
//!   state increment, and `kappa = (sum_i ||z_i^n - z_i^{n-1}||^2)^2`.

mod report;

use rayon::prelude::*;

pub use report::{effectivity, AccumulatedEstimate, EstimatorReport, FaceContribution, IndicatorRow};

use crate::error::Result;
use crate::fem::quadrature::{tet_rule, tri_rule};
use crate::fem::{l2_project, norms, FeSpace, JacobianMode, StateFields};
use crate::model::{reaction_derivatives, reaction_terms, ModelParams, Problem};
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorOptions {
    /// `kappa` as the square of the summed squared increments (default) or the
    /// plain sum.
    pub kappa_squared: bool,
    pub mode: JacobianMode,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            kappa_squared: true,
            mode: JacobianMode::Analytic,
        }
    }
}

/// P1 L2 projections of `d1(u_h, v_h, w_h)` and `g1(u_h, v_h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedCoefficients {
    pub d1h: Vec<f64>,
    pub g1h: Vec<f64>,
    /// True when both coefficients already lie in the P1 space, so the data
    /// errors vanish identically.
    pub exact: bool,
}

#[inline]
fn nodal4(field: &[f64], v: &[usize; 4]) -> [f64; 4] {
    [field[v[0]], field[v[1]], field[v[2]], field[v[3]]]
}

#[inline]
fn eval4(c: &[f64; 4], l: &[f64; 4]) -> f64 {
    c[0] * l[0] + c[1] * l[1] + c[2] * l[2] + c[3] * l[3]
}

#[inline]
fn eval3(c: &[f64; 3], l: &[f64; 3]) -> f64 {
    c[0] * l[0] + c[1] * l[1] + c[2] * l[2]
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

fn cell_grad(space: &FeSpace, field: &[f64], cell: usize) -> Vec3 {
    let v = space.mesh().cell_vertices(cell);
    grad(&nodal4(field, &v), &space.geometry().cells[cell].grads)
}

pub fn project_coefficients(space: &FeSpace, state: &StateFields, params: &ModelParams) -> Result<ProjectedCoefficients> {
    state.check_on(space.mesh())?;
    let n = space.num_nodes();
    let mesh = space.mesh();
    let d1h = match params.d1.constant() {
        Some(d) => vec![d; n],
        None => l2_project(space, |c, l, _| {
            let v = mesh.cell_vertices(c);
            let (u, vv, w) = (
                eval4(&nodal4(&state.u, &v), l),
                eval4(&nodal4(&state.v, &v), l),
                eval4(&nodal4(&state.w, &v), l),
            );
            params.d1.value(u, vv, w)
        })?,
    };
    let g1h = match params.chi.constant() {
        Some(chi) => state.u.iter().map(|u| chi * u).collect(),
        None => l2_project(space, |c, l, _| {
            let v = mesh.cell_vertices(c);
            let u = eval4(&nodal4(&state.u, &v), l);
            let vv = eval4(&nodal4(&state.v, &v), l);
            params.chi.value(vv) * u
        })?,
    };
    Ok(ProjectedCoefficients {
        d1h,
        g1h,
        exact: params.d1.constant().is_some() && params.chi.constant().is_some(),
    })
}

/// Pointwise element residuals `(rho_1, rho_2, rho_3)` in `cell` at the
/// barycentric point `l`.
#[allow(clippy::too_many_arguments)]
pub fn element_residual_at(
    space: &FeSpace,
    problem: &Problem,
    coeffs: &ProjectedCoefficients,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    t: f64,
    cell: usize,
    l: &[f64; 4],
) -> [f64; 3] {
    let mesh = space.mesh();
    let p = &problem.params;
    let vert = mesh.cell_vertices(cell);
    let grads = &space.geometry().cells[cell].grads;
    let at = |f: &[f64]| eval4(&nodal4(f, &vert), l);
    let (u, v, w) = (at(&state.u), at(&state.v), at(&state.w));
    let (gu, gv) = (grad(&nodal4(&state.u, &vert), grads), grad(&nodal4(&state.v, &vert), grads));
    let gd1 = grad(&nodal4(&coeffs.d1h, &vert), grads);
    let gg1 = grad(&nodal4(&coeffs.g1h, &vert), grads);
    let r = reaction_terms(u, v, w, p);
    let s = if problem.forcing.is_some() {
        problem.source(&vec3::combine4(&mesh.cell_points(cell), l), t)
    } else {
        [0.0; 3]
    };
    [
        (u - at(&prev.u)) / tau - vec3::dot(&gd1, &gu) + vec3::dot(&gg1, &gv) - r.g2 - s[0],
        (v - at(&prev.v)) / tau - r.fv - s[1],
        (w - at(&prev.w)) / tau - r.fw - s[2],
    ]
}

/// Weighted element residuals `h_K^2 ||rho_i^K||^2_{L2(K)}`.
pub fn element_residuals(
    space: &FeSpace,
    problem: &Problem,
    coeffs: &ProjectedCoefficients,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    t: f64,
) -> Result<Vec<[f64; 3]>> {
    state.check_same_mesh(prev)?;
    state.check_on(space.mesh())?;
    let rule = tet_rule(5);
    Ok((0..space.mesh().num_cells())
        .into_par_iter()
        .map(|c| {
            let cg = &space.geometry().cells[c];
            let mut acc = [0.0; 3];
            for (l, w) in rule.iter() {
                let r = element_residual_at(space, problem, coeffs, state, prev, tau, t, c, l);
                for i in 0..3 {
                    acc[i] += w * r[i] * r[i];
                }
            }
            acc.map(|a| a * cg.volume * cg.diameter * cg.diameter)
        })
        .collect())
}

/// Weighted face residuals `h_E ||rho_1^E||^2` and `h_E ||rho_3^E||^2`.
/// On boundary faces the jump is the full interior normal flux.
pub fn edge_residuals(
    space: &FeSpace,
    coeffs: &ProjectedCoefficients,
    state: &StateFields,
    params: &ModelParams,
) -> Result<Vec<FaceContribution>> {
    state.check_on(space.mesh())?;
    let rule = tri_rule(5);
    let mesh = space.mesh();
    Ok(mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(f, face)| {
            let fg = &space.geometry().faces[f];
            let n = fg.normal;
            let side = |c: usize| {
                (
                    vec3::dot(&n, &cell_grad(space, &state.u, c)),
                    vec3::dot(&n, &cell_grad(space, &state.v, c)),
                    vec3::dot(&n, &cell_grad(space, &state.w, c)),
                )
            };
            let (mut ju, mut jv, mut jw) = side(face.left);
            if let Some(r) = face.right {
                let (ru, rv, rw) = side(r);
                ju -= ru;
                jv -= rv;
                jw -= rw;
            }
            let d1h = face.vertices.map(|i| coeffs.d1h[i]);
            let g1h = face.vertices.map(|i| coeffs.g1h[i]);
            let mut acc_u = 0.0;
            for (l, w) in rule.iter() {
                let j = eval3(&d1h, l) * ju - eval3(&g1h, l) * jv;
                acc_u += w * j * j;
            }
            let jw = params.d2 * jw;
            FaceContribution {
                u: fg.diameter * fg.area * acc_u,
                w: fg.diameter * fg.area * jw * jw,
            }
        })
        .collect())
}

/// Weighted data errors: per element `h_K^2 ||eta_i^K||^2` (only `i = 1` can be
/// nonzero) and per face `h_E ||eta_1^E||^2`.
pub fn data_errors(
    space: &FeSpace,
    coeffs: &ProjectedCoefficients,
    state: &StateFields,
    params: &ModelParams,
    mode: JacobianMode,
) -> Result<(Vec<[f64; 3]>, Vec<f64>)> {
    state.check_on(space.mesh())?;
    let mesh = space.mesh();
    if coeffs.exact {
        return Ok((vec![[0.0; 3]; mesh.num_cells()], vec![0.0; mesh.faces().len()]));
    }
    let rule = tet_rule(5);
    let elements = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<[f64; 3]> {
            let cg = &space.geometry().cells[c];
            let vert = mesh.cell_vertices(c);
            let (uu, vv, ww) = (nodal4(&state.u, &vert), nodal4(&state.v, &vert), nodal4(&state.w, &vert));
            let (gu, gv, gw) = (grad(&uu, &cg.grads), grad(&vv, &cg.grads), grad(&ww, &cg.grads));
            let gd1h = grad(&nodal4(&coeffs.d1h, &vert), &cg.grads);
            let gg1h = grad(&nodal4(&coeffs.g1h, &vert), &cg.grads);
            let mut acc = 0.0;
            for (l, w) in rule.iter() {
                let (u, v, wv) = (eval4(&uu, l), eval4(&vv, l), eval4(&ww, l));
                let dd = params.d1_gradient(u, v, wv, mode)?;
                let chi = params.chi.value(v);
                let dchi = params.chi_derivative(v, mode)?;
                let mut gd1 = [0.0; 3];
                let mut gg1 = [0.0; 3];
                for d in 0..3 {
                    gd1[d] = dd[0] * gu[d] + dd[1] * gv[d] + dd[2] * gw[d];
                    gg1[d] = chi * gu[d] + dchi * u * gv[d];
                }
                let eta = vec3::dot(&vec3::sub(&gd1, &gd1h), &gu) - vec3::dot(&vec3::sub(&gg1, &gg1h), &gv);
                acc += w * eta * eta;
            }
            Ok([acc * cg.volume * cg.diameter * cg.diameter, 0.0, 0.0])
        })
        .collect::<Result<Vec<_>>>()?;
    let trule = tri_rule(5);
    let faces = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(f, face)| {
            let fg = &space.geometry().faces[f];
            let n = fg.normal;
            let nu = |c| vec3::dot(&n, &cell_grad(space, &state.u, c));
            let nv = |c| vec3::dot(&n, &cell_grad(space, &state.v, c));
            let (mut ju, mut jv) = (nu(face.left), nv(face.left));
            if let Some(r) = face.right {
                ju -= nu(r);
                jv -= nv(r);
            }
            let fvals = |field: &[f64]| face.vertices.map(|i| field[i]);
            let (fu, fv, fw) = (fvals(&state.u), fvals(&state.v), fvals(&state.w));
            let (fd, fgh) = (fvals(&coeffs.d1h), fvals(&coeffs.g1h));
            let mut acc = 0.0;
            for (l, w) in trule.iter() {
                let (u, v, wv) = (eval3(&fu, l), eval3(&fv, l), eval3(&fw, l));
                let dd = params.d1.value(u, v, wv) - eval3(&fd, l);
                let dg = params.chi.value(v) * u - eval3(&fgh, l);
                let j = dd * ju - dg * jv;
                acc += w * j * j;
            }
            fg.diameter * fg.area * acc
        })
        .collect();
    Ok((elements, faces))
}

/// Aggregate `alpha`, `theta` and the per-element marking field. Interior face
/// values are split equally between the two adjacent elements; boundary face
/// values go entirely to their element.
pub fn spatial_indicator(
    space: &FeSpace,
    element_residuals: &[[f64; 3]],
    face_residuals: &[FaceContribution],
    element_data: &[[f64; 3]],
    face_data: &[f64],
) -> (f64, f64, Vec<f64>) {
    let mesh = space.mesh();
    let mut marking: Vec<f64> = element_residuals
        .iter()
        .zip(element_data)
        .map(|(r, d)| r.iter().sum::<f64>() + d.iter().sum::<f64>())
        .collect();
    for (f, face) in mesh.faces().iter().enumerate() {
        let val = face_residuals[f].total() + face_data[f];
        match face.right {
            Some(r) => {
                marking[face.left] += 0.5 * val;
                marking[r] += 0.5 * val;
            }
            None => marking[face.left] += val,
        }
    }
    let alpha = element_residuals.iter().flatten().sum::<f64>() + face_residuals.iter().map(|f| f.total()).sum::<f64>();
    let theta = element_data.iter().flatten().sum::<f64>() + face_data.iter().sum::<f64>();
    (alpha, theta, marking)
}

/// Temporal indicators: `(gamma, kappa, [P1, P2, P3], per-element gamma)`.
pub fn temporal_indicator(
    space: &FeSpace,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    params: &ModelParams,
    opts: &EstimatorOptions,
) -> Result<(f64, f64, [f64; 3], Vec<f64>)> {
    let inc = state.difference(prev)?;
    state.check_on(space.mesh())?;
    let mesh = space.mesh();
    let n = space.num_nodes();

    let l2sq: f64 = (0..3).map(|f| norms(space, inc.field(f)).l2.powi(2)).sum();
    let kappa = if opts.kappa_squared { l2sq * l2sq } else { l2sq };

    // Coefficient fields of the linearised flux, as nodal interpolants.
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut d1 = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    for i in 0..n {
        let (u, v, w) = (state.u[i], state.v[i], state.w[i]);
        let dd = params.d1_gradient(u, v, w, opts.mode)?;
        let dr = reaction_derivatives(u, v, w, params, opts.mode)?;
        a[i] = dd[0] * inc.u[i] + dd[1] * inc.v[i] + dd[2] * inc.w[i];
        b[i] = dr.g1[0] * inc.u[i] + dr.g1[1] * inc.v[i];
        d1[i] = params.d1.value(u, v, w);
        g1[i] = reaction_terms(u, v, w, params).g1;
    }
    let flux = |c: usize| -> ([Vec3; 4], Vec3) {
        // Returns nodal-coefficient pieces needed to evaluate q1 on cell c:
        // q1(x) = A(x) grad u - B(x) grad v + D1(x) grad du - G1(x) grad dv.
        let gu = cell_grad(space, &state.u, c);
        let gv = cell_grad(space, &state.v, c);
        let gdu = cell_grad(space, &inc.u, c);
        let gdv = cell_grad(space, &inc.v, c);
        let div = vec3::dot(&cell_grad(space, &a, c), &gu) - vec3::dot(&cell_grad(space, &b, c), &gv)
            + vec3::dot(&cell_grad(space, &d1, c), &gdu)
            - vec3::dot(&cell_grad(space, &g1, c), &gdv);
        ([gu, gv, gdu, gdv], [div, 0.0, 0.0])
    };

    let rule = tet_rule(5);
    let per_cell: Vec<[f64; 3]> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| -> Result<[f64; 3]> {
            let cg = &space.geometry().cells[c];
            let vert = mesh.cell_vertices(c);
            let (_, [div, _, _]) = flux(c);
            let (uu, vv, ww) = (nodal4(&state.u, &vert), nodal4(&state.v, &vert), nodal4(&state.w, &vert));
            let (du, dv, dw) = (nodal4(&inc.u, &vert), nodal4(&inc.v, &vert), nodal4(&inc.w, &vert));
            let mut acc = [0.0; 3];
            for (l, w) in rule.iter() {
                let dr = reaction_derivatives(eval4(&uu, l), eval4(&vv, l), eval4(&ww, l), params, opts.mode)?;
                let (xu, xv, xw) = (eval4(&du, l), eval4(&dv, l), eval4(&dw, l));
                let r1 = -div - (dr.g2[0] * xu + dr.g2[1] * xv);
                let r2 = dr.fv[0] * xu + dr.fv[1] * xv + dr.fv[2] * xw;
                let r3 = dr.fw[0] * xu + dr.fw[2] * xw;
                acc[0] += w * r1 * r1;
                acc[1] += w * r2 * r2;
                acc[2] += w * r3 * r3;
            }
            let s = cg.volume * cg.diameter * cg.diameter;
            Ok(acc.map(|x| x * s))
        })
        .collect::<Result<Vec<_>>>()?;

    let trule = tri_rule(5);
    let per_face: Vec<[f64; 2]> = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(f, face)| {
            let fg = &space.geometry().faces[f];
            let nrm = fg.normal;
            let normal_parts = |c: usize| {
                let ([gu, gv, gdu, gdv], _) = flux(c);
                let gdw = cell_grad(space, &inc.w, c);
                [
                    vec3::dot(&nrm, &gu),
                    vec3::dot(&nrm, &gv),
                    vec3::dot(&nrm, &gdu),
                    vec3::dot(&nrm, &gdv),
                    vec3::dot(&nrm, &gdw),
                ]
            };
            let mut j = normal_parts(face.left);
            if let Some(r) = face.right {
                let jr = normal_parts(r);
                for k in 0..5 {
                    j[k] -= jr[k];
                }
            }
            let fv = |field: &[f64]| face.vertices.map(|i| field[i]);
            let (fa, fb, fd, fg1) = (fv(&a), fv(&b), fv(&d1), fv(&g1));
            let mut acc = 0.0;
            for (l, w) in trule.iter() {
                let q = eval3(&fa, l) * j[0] - eval3(&fb, l) * j[1] + eval3(&fd, l) * j[2] - eval3(&fg1, l) * j[3];
                acc += w * q * q;
            }
            let q3 = params.d2 * j[4];
            [fg.diameter * fg.area * acc, fg.diameter * fg.area * q3 * q3]
        })
        .collect();

    let mut parts = [0.0; 3];
    let mut per_element: Vec<f64> = per_cell.iter().map(|c| c.iter().sum()).collect();
    for c in &per_cell {
        for i in 0..3 {
            parts[i] += c[i];
        }
    }
    for (f, face) in mesh.faces().iter().enumerate() {
        parts[0] += per_face[f][0];
        parts[2] += per_face[f][1];
        let val = per_face[f][0] + per_face[f][1];
        match face.right {
            Some(r) => {
                per_element[face.left] += 0.5 * val;
                per_element[r] += 0.5 * val;
            }
            None => per_element[face.left] += val,
        }
    }
    let scale = tau / 3.0;
    let parts = parts.map(|p| scale * p);
    per_element.iter_mut().for_each(|x| *x *= scale);
    Ok((parts.iter().sum(), kappa, parts, per_element))
}

/// Every indicator for the step `prev -> state` ending at time `t`.
pub fn estimate(
    space: &FeSpace,
    problem: &Problem,
    state: &StateFields,
    prev: &StateFields,
    tau: f64,
    t: f64,
    opts: &EstimatorOptions,
) -> Result<EstimatorReport> {
    state.check_same_mesh(prev)?;
    let p = &problem.params;
    let coeffs = project_coefficients(space, state, p)?;
    let element_residual = element_residuals(space, problem, &coeffs, state, prev, tau, t)?;
    let face_residual = edge_residuals(space, &coeffs, state, p)?;
    let (element_data, face_data) = data_errors(space, &coeffs, state, p, opts.mode)?;
    let (alpha, theta, marking) = spatial_indicator(space, &element_residual, &face_residual, &element_data, &face_data);
    let (gamma, kappa, gamma_parts, temporal_element) = temporal_indicator(space, state, prev, tau, p, opts)?;
    let mut alpha_parts = [0.0; 3];
    for r in &element_residual {
        for i in 0..3 {
            alpha_parts[i] += r[i];
        }
    }
    for f in &face_residual {
        alpha_parts[0] += f.u;
        alpha_parts[2] += f.w;
    }
    Ok(EstimatorReport {
        mesh: space.mesh().id().0,
        tau,
        t,
        element_residual,
        element_data,
        face_residual,
        face_data,
        marking,
        temporal_element,
        alpha,
        alpha_parts,
        theta,
        gamma,
        gamma_parts,
        kappa,
    })
}

/// Per-element squared L2 distance between the initial data and its nodal
/// interpolant, summed over the three species.
pub fn initial_data_indicator(space: &FeSpace, problem: &Problem) -> Vec<f64> {
    let mesh = space.mesh();
    let init = problem.initial_state(mesh);
    let rule = tet_rule(5);
    (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cg = &space.geometry().cells[c];
            let vert = mesh.cell_vertices(c);
            let pts = mesh.cell_points(c);
            let mut acc = 0.0;
            for (l, w) in rule.iter() {
                let exact = problem.initial_value(&vec3::combine4(&pts, l));
                for f in 0..3 {
                    let e = eval4(&nodal4(init.field(f), &vert), l) - exact[f];
                    acc += w * e * e;
                }
            }
            acc * cg.volume
        })
        .collect()
}

/// Squared L2 distance between the initial data and its nodal interpolant.
pub fn initial_data_error(space: &FeSpace, problem: &Problem) -> f64 {
    initial_data_indicator(space, problem).iter().sum()
}
