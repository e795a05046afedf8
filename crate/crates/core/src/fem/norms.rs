use super::quadrature::tet_rule;
use super::FeSpace;
use crate::mesh::Point;
use crate::vec3::{self, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

impl Norms {
    fn from_squares(l2: f64, semi: f64) -> Self {
        Norms {
            l2: l2.sqrt(),
            h1_semi: semi.sqrt(),
            h1: (l2 + semi).sqrt(),
        }
    }
}

/// Exact norms of a P1 field.
pub fn norms(space: &FeSpace, field: &[f64]) -> Norms {
    assert_eq!(field.len(), space.num_nodes(), "field does not live on this mesh");
    let mesh = space.mesh();
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for (c, cg) in space.geometry().cells.iter().enumerate() {
        let v = mesh.cell_vertices(c);
        let x = v.map(|i| field[i]);
        let sum: f64 = x.iter().sum();
        let sq: f64 = x.iter().map(|a| a * a).sum();
        l2 += cg.volume / 20.0 * (sq + sum * sum);
        let mut g = [0.0; 3];
        for k in 0..4 {
            g = vec3::add(&g, &vec3::scale(&cg.grads[k], x[k]));
        }
        semi += cg.volume * vec3::dot(&g, &g);
    }
    Norms::from_squares(l2, semi)
}

/// Norms of `field - f` for a smooth `f` with gradient `grad_f`, by degree-5
/// quadrature.
pub fn error_norms_fn(
    space: &FeSpace,
    field: &[f64],
    f: impl Fn(&Point) -> f64,
    grad_f: impl Fn(&Point) -> Vec3,
) -> Norms {
    assert_eq!(field.len(), space.num_nodes(), "field does not live on this mesh");
    let mesh = space.mesh();
    let rule = tet_rule(5);
    let mut l2 = 0.0;
    let mut semi = 0.0;
    for (c, cg) in space.geometry().cells.iter().enumerate() {
        let v = mesh.cell_vertices(c);
        let x = v.map(|i| field[i]);
        let pts = mesh.cell_points(c);
        let mut g = [0.0; 3];
        for k in 0..4 {
            g = vec3::add(&g, &vec3::scale(&cg.grads[k], x[k]));
        }
        for (l, w) in rule.iter() {
            let p = vec3::combine4(&pts, l);
            let e = x[0] * l[0] + x[1] * l[1] + x[2] * l[2] + x[3] * l[3] - f(&p);
            let ge = vec3::sub(&g, &grad_f(&p));
            l2 += w * cg.volume * e * e;
            semi += w * cg.volume * vec3::dot(&ge, &ge);
        }
    }
    Norms::from_squares(l2, semi)
}
