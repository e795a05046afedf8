//! Conforming P1 finite elements on tetrahedral meshes.

mod assembly;
mod norms;
pub mod quadrature;
mod sparse;
mod state;

use std::sync::Arc;

pub use assembly::{
    assemble_diffusion, assemble_haptotaxis, assemble_jacobian, assemble_jacobian_with, assemble_mass,
    assemble_reaction_residuals, assemble_residual, jacobian_directional_error, l2_project, l2_project_fn, load_vector,
    Residual,
};
pub use norms::{error_norms_fn, norms, Norms};
pub use sparse::{SparseOperator, SparsityPattern};
pub use state::StateFields;

pub use crate::model::JacobianMode;

use crate::error::Result;
use crate::mesh::{geometry_tables, GeometryTables, SimplicialMesh};

/// A mesh together with everything assembly needs: geometry, the vertex
/// sparsity pattern and the storage positions of each cell's local entries.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<SimplicialMesh>,
    geometry: GeometryTables,
    pattern: Arc<SparsityPattern>,
    block_pattern: Arc<SparsityPattern>,
    local: Vec<[[u32; 4]; 4]>,
}

impl FeSpace {
    pub fn new(mesh: Arc<SimplicialMesh>) -> Result<Self> {
        let geometry = geometry_tables(&mesh)?;
        let pattern = SparsityPattern::from_mesh(&mesh);
        let block_pattern = pattern.expand_blocks(3);
        let local = (0..mesh.num_cells())
            .map(|c| {
                let v = mesh.cell_vertices(c);
                let mut pos = [[0u32; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        pos[a][b] = pattern.position(v[a], v[b]).expect("cell coupling missing from pattern") as u32;
                    }
                }
                pos
            })
            .collect();
        Ok(FeSpace {
            mesh,
            geometry,
            pattern: Arc::new(pattern),
            block_pattern: Arc::new(block_pattern),
            local,
        })
    }

    pub fn from_mesh(mesh: SimplicialMesh) -> Result<Self> {
        Self::new(Arc::new(mesh))
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<SimplicialMesh> {
        &self.mesh
    }

    pub fn geometry(&self) -> &GeometryTables {
        &self.geometry
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn block_pattern(&self) -> &Arc<SparsityPattern> {
        &self.block_pattern
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    /// Storage index in the vertex pattern of the coupling between local
    /// vertices `a` and `b` of `cell`.
    pub fn local_position(&self, cell: usize, a: usize, b: usize) -> usize {
        self.local[cell][a][b] as usize
    }

    /// Storage index in the interleaved block pattern of the coupling between
    /// field `f` at local vertex `a` and field `g` at local vertex `b`.
    pub fn block_position(&self, cell: usize, a: usize, f: usize, b: usize, g: usize) -> usize {
        let v = self.mesh.cell_vertices(cell);
        let i = v[a];
        let start = self.pattern.row_start(i);
        let len = self.pattern.row(i).len();
        let k = self.local[cell][a][b] as usize - start;
        9 * start + 3 * f * len + 3 * k + g
    }
}
