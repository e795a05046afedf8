//! Dense brute-force reference assembly: barycentric gradients from a 4x4
//! inverse, collapsed Gauss-Legendre quadrature (exact to degree 11) and
//! reactions written out from the model equations.

use invadapt::fem::StateFields;
use invadapt::mesh::SimplicialMesh;
use invadapt::model::ModelParams;
use nalgebra::{DMatrix, Matrix4, SymmetricEigen};

type Scalar3 = Box<dyn Fn(f64, f64, f64) -> f64>;
type Vector3 = Box<dyn Fn(f64, f64, f64) -> [f64; 3]>;
type Scalar1 = Box<dyn Fn(f64) -> f64>;

pub struct Coefficients {
    pub d1: Scalar3,
    pub d1_grad: Vector3,
    pub chi: Scalar1,
    pub chi_prime: Scalar1,
    pub d2: f64,
    pub lambda: f64,
    pub rho: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Coefficients {
    /// Scalars from `p`; `d1` and `chi` must be constants.
    pub fn from_params(p: &ModelParams) -> Self {
        let d1 = p.d1.constant().unwrap_or(f64::NAN);
        let chi = p.chi.constant().unwrap_or(f64::NAN);
        Coefficients {
            d1: Box::new(move |_, _, _| d1),
            d1_grad: Box::new(|_, _, _| [0.0; 3]),
            chi: Box::new(move |_| chi),
            chi_prime: Box::new(|_| 0.0),
            d2: p.d2,
            lambda: p.lambda,
            rho: p.rho,
            eta: p.eta,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

/// Gauss-Legendre nodes and weights on [0, 1] (Golub-Welsch).
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v = eig.eigenvectors[(0, i)];
            (0.5 * (x + 1.0), v * v)
        })
        .collect()
}

/// Barycentric points and weights (summing to one) on the reference tetrahedron.
fn collapsed_rule(n: usize) -> Vec<([f64; 4], f64)> {
    let g = gauss_legendre(n);
    let mut out = Vec::new();
    for &(a, wa) in &g {
        for &(b, wb) in &g {
            for &(c, wc) in &g {
                let x = a;
                let y = b * (1.0 - a);
                let z = c * (1.0 - a) * (1.0 - b);
                let jac = (1.0 - a).powi(2) * (1.0 - b);
                out.push(([1.0 - x - y - z, x, y, z], 6.0 * wa * wb * wc * jac));
            }
        }
    }
    out
}

struct Cell {
    nodes: [usize; 4],
    points: [[f64; 3]; 4],
    volume: f64,
    grads: [[f64; 3]; 4],
}

fn cells(mesh: &SimplicialMesh) -> Vec<Cell> {
    (0..mesh.num_cells())
        .map(|c| {
            let nodes = mesh.cell_vertices(c);
            let points = mesh.cell_points(c);
            let m = Matrix4::from_fn(|r, k| if k == 0 { 1.0 } else { points[r][k - 1] });
            let inv = m.try_inverse().expect("non-degenerate cell");
            let grads = std::array::from_fn(|a| [inv[(1, a)], inv[(2, a)], inv[(3, a)]]);
            Cell {
                nodes,
                points,
                volume: m.determinant().abs() / 6.0,
                grads,
            }
        })
        .collect()
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn at(l: &[f64; 4], p: &[[f64; 3]; 4]) -> [f64; 3] {
    std::array::from_fn(|d| (0..4).map(|k| l[k] * p[k][d]).sum())
}

fn local(field: &[f64], nodes: &[usize; 4]) -> [f64; 4] {
    nodes.map(|i| field[i])
}

fn value(c: &[f64; 4], l: &[f64; 4]) -> f64 {
    (0..4).map(|k| c[k] * l[k]).sum()
}

fn gradient(c: &[f64; 4], g: &[[f64; 3]; 4]) -> [f64; 3] {
    std::array::from_fn(|d| (0..4).map(|k| c[k] * g[k][d]).sum())
}

const POINTS: usize = 6;

pub fn mass(mesh: &SimplicialMesh) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut m = DMatrix::zeros(n, n);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        for (l, w) in &rule {
            for a in 0..4 {
                for b in 0..4 {
                    m[(cell.nodes[a], cell.nodes[b])] += w * cell.volume * l[a] * l[b];
                }
            }
        }
    }
    m
}

pub fn diffusion(mesh: &SimplicialMesh, kappa: impl Fn(&[f64; 3]) -> f64) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut k = DMatrix::zeros(n, n);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        for (l, w) in &rule {
            let x = at(l, &cell.points);
            for a in 0..4 {
                for b in 0..4 {
                    k[(cell.nodes[a], cell.nodes[b])] += w * cell.volume * kappa(&x) * dot(&cell.grads[a], &cell.grads[b]);
                }
            }
        }
    }
    k
}

pub fn load(mesh: &SimplicialMesh, f: impl Fn(&[f64; 3]) -> f64) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(mesh.num_vertices(), 1);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        for (l, w) in &rule {
            let fx = f(&at(l, &cell.points));
            for a in 0..4 {
                b[(cell.nodes[a], 0)] += w * cell.volume * fx * l[a];
            }
        }
    }
    b
}

pub fn haptotaxis(mesh: &SimplicialMesh, c: &Coefficients, s: &StateFields) -> DMatrix<f64> {
    let n = mesh.num_vertices();
    let mut h = DMatrix::zeros(n, n);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        let vv = local(&s.v, &cell.nodes);
        let gv = gradient(&vv, &cell.grads);
        for (l, w) in &rule {
            let chi = (c.chi)(value(&vv, l));
            for a in 0..4 {
                for b in 0..4 {
                    h[(cell.nodes[a], cell.nodes[b])] += w * cell.volume * chi * l[b] * dot(&gv, &cell.grads[a]);
                }
            }
        }
    }
    h
}

/// Interleaved residual `3 * node + field` of the unforced backward-Euler step.
pub fn residual(mesh: &SimplicialMesh, c: &Coefficients, s: &StateFields, prev: &StateFields, tau: f64) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(3 * mesh.num_vertices(), 1);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        let (uu, vv, ww) = (local(&s.u, &cell.nodes), local(&s.v, &cell.nodes), local(&s.w, &cell.nodes));
        let (up, vp, wp) = (local(&prev.u, &cell.nodes), local(&prev.v, &cell.nodes), local(&prev.w, &cell.nodes));
        let (gu, gv, gw) = (gradient(&uu, &cell.grads), gradient(&vv, &cell.grads), gradient(&ww, &cell.grads));
        for (l, wq) in &rule {
            let (u, v, w) = (value(&uu, l), value(&vv, l), value(&ww, l));
            let d1 = (c.d1)(u, v, w);
            let g1 = (c.chi)(v) * u;
            let g2 = c.lambda * u * (1.0 - u - v);
            let fv = c.rho * v * (1.0 - u - v) - c.eta * v * w;
            let fw = c.alpha * u * (1.0 - w) - c.beta * w;
            let flux: [f64; 3] = std::array::from_fn(|d| d1 * gu[d] - g1 * gv[d]);
            let dv = wq * cell.volume;
            for a in 0..4 {
                let i = cell.nodes[a];
                r[(3 * i, 0)] += dv * (((u - value(&up, l)) / tau - g2) * l[a] + dot(&flux, &cell.grads[a]));
                r[(3 * i + 1, 0)] += dv * ((v - value(&vp, l)) / tau - fv) * l[a];
                r[(3 * i + 2, 0)] += dv * (((w - value(&wp, l)) / tau - fw) * l[a] + c.d2 * dot(&gw, &cell.grads[a]));
            }
        }
    }
    r
}

/// Jacobian of [`residual`] with respect to the interleaved state.
pub fn jacobian(mesh: &SimplicialMesh, c: &Coefficients, s: &StateFields, tau: f64) -> DMatrix<f64> {
    let n = 3 * mesh.num_vertices();
    let mut jac = DMatrix::zeros(n, n);
    let rule = collapsed_rule(POINTS);
    for cell in cells(mesh) {
        let (uu, vv, ww) = (local(&s.u, &cell.nodes), local(&s.v, &cell.nodes), local(&s.w, &cell.nodes));
        let (gu, gv) = (gradient(&uu, &cell.grads), gradient(&vv, &cell.grads));
        for (l, wq) in &rule {
            let (u, v, w) = (value(&uu, l), value(&vv, l), value(&ww, l));
            let d1 = (c.d1)(u, v, w);
            let dd = (c.d1_grad)(u, v, w);
            let chi = (c.chi)(v);
            let g1 = chi * u;
            let (g1_u, g1_v) = (chi, (c.chi_prime)(v) * u);
            let (g2_u, g2_v) = (c.lambda * (1.0 - 2.0 * u - v), -c.lambda * u);
            let (fv_u, fv_v, fv_w) = (-c.rho * v, c.rho * (1.0 - u - 2.0 * v) - c.eta * w, -c.eta * v);
            let (fw_u, fw_w) = (c.alpha * (1.0 - w), -c.alpha * u - c.beta);
            let dv = wq * cell.volume;
            for a in 0..4 {
                let i = cell.nodes[a];
                let ga = &cell.grads[a];
                for b in 0..4 {
                    let j = cell.nodes[b];
                    let gb = &cell.grads[b];
                    let pp = l[a] * l[b];
                    let gu_a = dot(&gu, ga);
                    let gv_a = dot(&gv, ga);
                    jac[(3 * i, 3 * j)] +=
                        dv * (pp / tau - g2_u * pp + d1 * dot(gb, ga) + dd[0] * l[b] * gu_a - g1_u * l[b] * gv_a);
                    jac[(3 * i, 3 * j + 1)] += dv * (-g2_v * pp + dd[1] * l[b] * gu_a - g1_v * l[b] * gv_a - g1 * dot(gb, ga));
                    jac[(3 * i, 3 * j + 2)] += dv * dd[2] * l[b] * gu_a;
                    jac[(3 * i + 1, 3 * j)] += dv * -fv_u * pp;
                    jac[(3 * i + 1, 3 * j + 1)] += dv * (pp / tau - fv_v * pp);
                    jac[(3 * i + 1, 3 * j + 2)] += dv * -fv_w * pp;
                    jac[(3 * i + 2, 3 * j)] += dv * -fw_u * pp;
                    jac[(3 * i + 2, 3 * j + 2)] += dv * (pp / tau - fw_w * pp + c.d2 * dot(gb, ga));
                }
            }
        }
    }
    jac
}
