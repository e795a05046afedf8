use rayon::prelude::*;

use super::SimplicialMesh;
use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct CellGeometry {
    pub volume: f64,
    /// Element diameter h_K.
    pub diameter: f64,
    /// Gradients of the four barycentric coordinates (constant on the cell).
    pub grads: [Vec3; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceGeometry {
    pub area: f64,
    /// Face diameter h_E (longest edge).
    pub diameter: f64,
    /// Unit normal pointing from the left cell into the right cell, outward on
    /// the boundary.
    pub normal: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometryTables {
    pub cells: Vec<CellGeometry>,
    pub faces: Vec<FaceGeometry>,
}

impl GeometryTables {
    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }
}

/// Gradients of barycentric coordinates and signed volume of a tetrahedron.
pub(crate) fn tet_gradients(p: &[Vec3; 4]) -> ([Vec3; 4], f64) {
    let e1 = vec3::sub(&p[1], &p[0]);
    let e2 = vec3::sub(&p[2], &p[0]);
    let e3 = vec3::sub(&p[3], &p[0]);
    let c23 = vec3::cross(&e2, &e3);
    let det = vec3::dot(&e1, &c23);
    let inv = 1.0 / det;
    let g1 = vec3::scale(&c23, inv);
    let g2 = vec3::scale(&vec3::cross(&e3, &e1), inv);
    let g3 = vec3::scale(&vec3::cross(&e1, &e2), inv);
    let g0 = [-(g1[0] + g2[0] + g3[0]), -(g1[1] + g2[1] + g3[1]), -(g1[2] + g2[2] + g3[2])];
    ([g0, g1, g2, g3], det / 6.0)
}

pub fn geometry_tables(mesh: &SimplicialMesh) -> Result<GeometryTables> {
    let cells: Vec<CellGeometry> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let p = mesh.cell_points(c);
            let (grads, signed) = tet_gradients(&p);
            let volume = signed.abs();
            let diameter = vec3::diameter(&p);
            if !(volume > 1e-14 * diameter.powi(3)) {
                return Err(Error::DegenerateElement { index: c, volume });
            }
            Ok(CellGeometry {
                volume,
                diameter,
                grads,
            })
        })
        .collect::<Result<_>>()?;

    let faces = mesh
        .faces()
        .par_iter()
        .enumerate()
        .map(|(fi, face)| {
            let p = face.vertices.map(|v| mesh.vertices()[v]);
            let n = vec3::cross(&vec3::sub(&p[1], &p[0]), &vec3::sub(&p[2], &p[0]));
            let len = vec3::norm(&n);
            let area = 0.5 * len;
            let local = mesh
                .cell_faces(face.left)
                .iter()
                .position(|&f| f == fi)
                .expect("face missing from its left cell");
            // The gradient of the opposite barycentric coordinate points inward.
            let g = cells[face.left].grads[local];
            let mut normal = vec3::scale(&n, 1.0 / len);
            if vec3::dot(&normal, &g) > 0.0 {
                normal = vec3::scale(&normal, -1.0);
            }
            FaceGeometry {
                area,
                diameter: vec3::diameter(&p),
                normal,
            }
        })
        .collect();
    Ok(GeometryTables { cells, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_cube;

    #[test]
    fn reference_tet_gradients() {
        let p = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (g, vol) = tet_gradients(&p);
        assert!((vol - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(g[0], [-1.0, -1.0, -1.0]);
        assert_eq!(g[1], [1.0, 0.0, 0.0]);
        assert_eq!(g[3], [0.0, 0.0, 1.0]);
    }

    #[test]
    fn structured_tables() {
        let m = build_structured_cube(3).unwrap();
        let g = geometry_tables(&m).unwrap();
        assert!((g.total_volume() - 1.0).abs() < 1e-14);
        for f in &g.faces {
            assert!((vec3::norm(&f.normal) - 1.0).abs() < 1e-14);
        }
        for (face, fg) in m.faces().iter().zip(&g.faces) {
            if face.is_boundary() {
                // outward: normal points away from the cube centre
                let p = m.vertices()[face.vertices[0]];
                let out = vec3::sub(&p, &[0.5, 0.5, 0.5]);
                assert!(vec3::dot(&out, &fg.normal) > 0.0);
            }
        }
    }
}
