use rayon::prelude::*;

use super::geometry::tet_gradients;
use super::{MeshId, Point, SimplicialMesh};
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Bucket grid over the unit cube for locating the cell that contains a point.
pub struct PointLocator<'a> {
    mesh: &'a SimplicialMesh,
    grads: Vec<[Vec3; 4]>,
    res: usize,
    buckets: Vec<Vec<u32>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Self {
        let nc = mesh.num_cells();
        let res = ((nc as f64 / 4.0).cbrt().ceil() as usize).clamp(1, 128);
        let mut buckets = vec![Vec::new(); res * res * res];
        let mut grads = Vec::with_capacity(nc);
        for c in 0..nc {
            let p = mesh.cell_points(c);
            grads.push(tet_gradients(&p).0);
            let mut lo = [usize::MAX; 3];
            let mut hi = [0usize; 3];
            for q in &p {
                for d in 0..3 {
                    let b = Self::bucket_coord(res, q[d]);
                    lo[d] = lo[d].min(b);
                    hi[d] = hi[d].max(b);
                }
            }
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        buckets[i + res * (j + res * k)].push(c as u32);
                    }
                }
            }
        }
        PointLocator {
            mesh,
            grads,
            res,
            buckets,
        }
    }

    fn bucket_coord(res: usize, x: f64) -> usize {
        ((x * res as f64).floor().max(0.0) as usize).min(res - 1)
    }

    /// Barycentric coordinates of `p` with respect to `cell`.
    pub fn barycentric(&self, cell: usize, p: &Point) -> [f64; 4] {
        let x0 = self.mesh.vertices()[self.mesh.cell_vertices(cell)[0]];
        let d = vec3::sub(p, &x0);
        let g = &self.grads[cell];
        let l1 = vec3::dot(&g[1], &d);
        let l2 = vec3::dot(&g[2], &d);
        let l3 = vec3::dot(&g[3], &d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    /// Cell containing `p` and the clamped, renormalised barycentric weights.
    /// Points slightly outside the cube snap to the nearest cell.
    pub fn locate(&self, p: &Point) -> Option<(usize, [f64; 4])> {
        let b = [
            Self::bucket_coord(self.res, p[0]),
            Self::bucket_coord(self.res, p[1]),
            Self::bucket_coord(self.res, p[2]),
        ];
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for &c in &self.buckets[b[0] + self.res * (b[1] + self.res * b[2])] {
            let c = c as usize;
            let l = self.barycentric(c, p);
            let worst = l.iter().cloned().fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((c, l, worst));
                if worst >= 0.0 {
                    break;
                }
            }
        }
        let (c, l, worst) = best?;
        if worst < -1e-8 {
            return None;
        }
        let mut w = l.map(|x| x.max(0.0));
        let s: f64 = w.iter().sum();
        for x in &mut w {
            *x /= s;
        }
        Some((c, w))
    }

    /// Value at `p` of the P1 function with nodal values `field`.
    pub fn evaluate(&self, field: &[f64], p: &Point) -> Option<f64> {
        let (c, w) = self.locate(p)?;
        let v = self.mesh.cell_vertices(c);
        Some((0..4).map(|i| w[i] * field[v[i]]).sum())
    }
}

/// Source vertices and barycentric weights defining one target nodal value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stencil {
    pub vertices: [usize; 4],
    pub weights: [f64; 4],
}

/// Nodal P1 interpolation from one mesh onto the vertices of another.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMap {
    pub source: MeshId,
    pub target: MeshId,
    pub source_len: usize,
    pub stencils: Vec<Stencil>,
}

impl TransferMap {
    pub fn identity(mesh: &SimplicialMesh) -> Self {
        TransferMap {
            source: mesh.id(),
            target: mesh.id(),
            source_len: mesh.num_vertices(),
            stencils: (0..mesh.num_vertices())
                .map(|i| Stencil {
                    vertices: [i; 4],
                    weights: [1.0, 0.0, 0.0, 0.0],
                })
                .collect(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }

    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        assert_eq!(field.len(), self.source_len, "field does not live on the source mesh");
        if self.is_identity() {
            return field.to_vec();
        }
        self.stencils
            .iter()
            .map(|s| (0..4).map(|i| s.weights[i] * field[s.vertices[i]]).sum())
            .collect()
    }
}

/// Check that two meshes belong to one nested hierarchy.
pub fn check_nested(a: &SimplicialMesh, b: &SimplicialMesh) -> Result<()> {
    let (la, lb) = (a.lineage(), b.lineage());
    if la.root == lb.root {
        return Ok(());
    }
    if a.is_structured_root() && b.is_structured_root() {
        let (na, nb) = (la.root_n, lb.root_n);
        if na % nb == 0 || nb % na == 0 {
            return Ok(());
        }
    }
    Err(Error::NonNested(format!(
        "meshes from roots {} (n={}) and {} (n={}) are not nested",
        la.root, la.root_n, lb.root, lb.root_n
    )))
}

/// Interpolation of fields on `source` onto the vertices of `target`. Exact
/// for P1 fields when `target` refines `source`.
pub fn build_transfer(source: &SimplicialMesh, target: &SimplicialMesh) -> Result<TransferMap> {
    if source.id() == target.id() {
        return Ok(TransferMap::identity(source));
    }
    check_nested(source, target)?;
    let locator = PointLocator::new(source);
    let stencils = target
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (c, w) = locator.locate(p).ok_or_else(|| {
                Error::NonNested(format!("target vertex {i} lies outside the source mesh"))
            })?;
            Ok(Stencil {
                vertices: source.cell_vertices(c),
                weights: w,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferMap {
        source: source.id(),
        target: target.id(),
        source_len: source.num_vertices(),
        stencils,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_cube;

    #[test]
    fn reproduces_linear_fields() {
        let coarse = build_structured_cube(2).unwrap();
        let fine = coarse.refine_uniform(2).refine(&[0, 5, 9]);
        let t = build_transfer(&coarse, &fine).unwrap();
        let f: Vec<f64> = coarse.vertices().iter().map(|p| p[0] - 2.0 * p[2]).collect();
        let g = t.apply(&f);
        for (p, v) in fine.vertices().iter().zip(&g) {
            assert!((v - (p[0] - 2.0 * p[2])).abs() <= 1e-13);
        }
        for s in &t.stencils {
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(s.weights.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn identity_and_rejection() {
        let m = build_structured_cube(2).unwrap();
        assert!(build_transfer(&m, &m).unwrap().is_identity());
        let a = build_structured_cube(4).unwrap();
        assert!(build_transfer(&m, &a).is_ok());
        let b = build_structured_cube(3).unwrap();
        assert!(matches!(build_transfer(&m, &b), Err(Error::NonNested(_))));
        let c = a.refine(&[0]);
        assert!(matches!(build_transfer(&m, &c), Err(Error::NonNested(_))));
    }
}
