use crate::error::{Error, Result};
use crate::mesh::{MeshId, SimplicialMesh, TransferMap};

/// Nodal values of the three species on one mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct StateFields {
    pub mesh: MeshId,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl StateFields {
    pub fn new(mesh: &SimplicialMesh, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = mesh.num_vertices();
        if u.len() != n || v.len() != n || w.len() != n {
            return Err(Error::MeshMismatch(format!(
                "field lengths ({}, {}, {}) do not match {n} vertices",
                u.len(),
                v.len(),
                w.len()
            )));
        }
        let s = StateFields { mesh: mesh.id(), u, v, w };
        if !s.is_finite() {
            return Err(Error::InvalidArgument("state contains non-finite values".into()));
        }
        Ok(s)
    }

    pub fn constant(mesh: &SimplicialMesh, u: f64, v: f64, w: f64) -> Self {
        let n = mesh.num_vertices();
        StateFields {
            mesh: mesh.id(),
            u: vec![u; n],
            v: vec![v; n],
            w: vec![w; n],
        }
    }

    /// Nodal interpolation of a pointwise function.
    pub fn interpolate(mesh: &SimplicialMesh, f: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        let n = mesh.num_vertices();
        let mut s = StateFields::constant(mesh, 0.0, 0.0, 0.0);
        for (i, p) in mesh.vertices().iter().enumerate().take(n) {
            let [a, b, c] = f(p);
            s.u[i] = a;
            s.v[i] = b;
            s.w[i] = c;
        }
        s
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn field(&self, f: usize) -> &[f64] {
        match f {
            0 => &self.u,
            1 => &self.v,
            2 => &self.w,
            _ => panic!("field index {f} out of range"),
        }
    }

    pub fn field_mut(&mut self, f: usize) -> &mut Vec<f64> {
        match f {
            0 => &mut self.u,
            1 => &mut self.v,
            2 => &mut self.w,
            _ => panic!("field index {f} out of range"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).chain(&self.w).all(|x| x.is_finite())
    }

    /// Interleaved vector `[u0, v0, w0, u1, ...]`.
    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.len());
        for i in 0..self.len() {
            x.extend([self.u[i], self.v[i], self.w[i]]);
        }
        x
    }

    pub fn from_interleaved(mesh: MeshId, x: &[f64]) -> Self {
        assert_eq!(x.len() % 3, 0);
        let n = x.len() / 3;
        StateFields {
            mesh,
            u: (0..n).map(|i| x[3 * i]).collect(),
            v: (0..n).map(|i| x[3 * i + 1]).collect(),
            w: (0..n).map(|i| x[3 * i + 2]).collect(),
        }
    }

    /// Componentwise `self - other`.
    pub fn difference(&self, other: &StateFields) -> Result<StateFields> {
        self.check_same_mesh(other)?;
        let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(StateFields {
            mesh: self.mesh,
            u: sub(&self.u, &other.u),
            v: sub(&self.v, &other.v),
            w: sub(&self.w, &other.w),
        })
    }

    pub fn check_same_mesh(&self, other: &StateFields) -> Result<()> {
        if self.mesh != other.mesh || self.len() != other.len() {
            return Err(Error::MeshMismatch(format!(
                "states live on meshes {:?} and {:?}",
                self.mesh, other.mesh
            )));
        }
        Ok(())
    }

    pub fn check_on(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.mesh != mesh.id() || self.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch(format!(
                "state on mesh {:?} used with mesh {:?}",
                self.mesh,
                mesh.id()
            )));
        }
        Ok(())
    }

    pub fn transfer(&self, map: &TransferMap) -> Result<StateFields> {
        if map.source != self.mesh {
            return Err(Error::MeshMismatch("transfer map does not start on the state's mesh".into()));
        }
        Ok(StateFields {
            mesh: map.target,
            u: map.apply(&self.u),
            v: map.apply(&self.v),
            w: map.apply(&self.w),
        })
    }
}
