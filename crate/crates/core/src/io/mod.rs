//! VTU output and restartable checkpoints.

mod vtu;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use vtu::{parse_vtu, read_vtu, vtu_string, write_vtu, CellData, VtuData};

use crate::error::{Error, Result};
use crate::fem::StateFields;
use crate::mesh::SimplicialMesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub t: f64,
    pub root_n: usize,
    pub vtu: String,
    pub nodes: usize,
    pub cells: usize,
}

/// Write `<stem>.vtu` and `<stem>.json`. Returns the manifest path.
pub fn write_checkpoint(dir: impl AsRef<Path>, stem: &str, mesh: &SimplicialMesh, state: &StateFields, t: f64) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let vtu_name = format!("{stem}.vtu");
    write_vtu(dir.join(&vtu_name), mesh, Some(state), &[])?;
    let manifest = CheckpointManifest {
        t,
        root_n: mesh.lineage().root_n,
        vtu: vtu_name,
        nodes: mesh.num_vertices(),
        cells: mesh.num_cells(),
    };
    let path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Restore a checkpoint. The mesh keeps vertex order, cell order, refinement
/// tags and levels but starts a new refinement history.
pub fn read_checkpoint(manifest_path: impl AsRef<Path>) -> Result<(SimplicialMesh, StateFields, f64)> {
    let path = manifest_path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let m: CheckpointManifest = serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let vtu_path = path.parent().unwrap_or(Path::new(".")).join(&m.vtu);
    let data = read_vtu(&vtu_path)?;
    if data.points.len() != m.nodes || data.cells.len() != m.cells {
        return Err(Error::Parse(format!("{} does not match its manifest", vtu_path.display())));
    }
    let column = |name: &str| {
        data.cell_data
            .get(name)
            .filter(|c| c.len() == data.cells.len())
            .ok_or_else(|| Error::Parse(format!("checkpoint lacks cell array `{name}`")))
    };
    let (tags, levels) = (column("tag")?, column("level")?);
    let cells = data
        .cells
        .iter()
        .zip(tags.iter().zip(levels))
        .map(|(c, (&t, &l))| (*c, t as u8, l as u32))
        .collect();
    let mesh = SimplicialMesh::from_cells(data.points.clone(), cells, m.root_n)?;
    let field = |name: &str| {
        data.point_data
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("checkpoint lacks point array `{name}`")))
    };
    let state = StateFields::new(&mesh, field("u")?, field("v")?, field("w")?)?;
    Ok((mesh, state, m.t))
}
