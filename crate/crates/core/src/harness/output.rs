use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::study::{Comparison, ConvergenceRow, Eoc, TemporalRow};
use crate::amr::AdaptiveStepRecord;
use crate::error::{Error, Result};
use crate::fem::StateFields;
use crate::io::write_vtu;
use crate::mesh::SimplicialMesh;

/// Optional number with four decimals, `-` when undefined.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or("-".to_string(), |v| format!("{v:.4}"))
}

pub fn provenance() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub name: String,
    pub mesh: Arc<SimplicialMesh>,
    pub state: StateFields,
    pub indicator: Vec<f64>,
}

/// Everything a run produces.
#[derive(Clone, Debug, Default)]
pub struct RunArtifact {
    pub config: String,
    pub rows: Vec<ConvergenceRow>,
    pub uniform_rows: Vec<ConvergenceRow>,
    pub temporal_rows: Vec<TemporalRow>,
    pub steps: Vec<AdaptiveStepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub phases: Vec<Phase>,
    pub eoc: Option<Eoc>,
    pub temporal_eoc: Vec<Option<f64>>,
    pub comparisons: Vec<Comparison>,
    pub checks: Vec<Check>,
}

impl RunArtifact {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub provenance: String,
    pub config: String,
    pub phases: Vec<Phase>,
    pub rows: Vec<ConvergenceRow>,
    pub uniform_rows: Vec<ConvergenceRow>,
    pub temporal_rows: Vec<TemporalRow>,
    pub steps: Vec<AdaptiveStepRecord>,
    pub eoc: Option<Eoc>,
    pub temporal_eoc: Vec<Option<f64>>,
    pub comparisons: Vec<Comparison>,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Parse(format!("{}: {e}", path.display()))
    }
}

/// Write the artifact into `dir`: CSV tables, VTU snapshots and
/// `manifest.json`. Returns the files written, manifest last.
pub fn emit_outputs(dir: impl AsRef<Path>, art: &RunArtifact) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    if !art.rows.is_empty() {
        files.push(dir.join("convergence.csv"));
        write_csv(files.last().unwrap(), &art.rows)?;
    }
    if !art.uniform_rows.is_empty() {
        files.push(dir.join("uniform.csv"));
        write_csv(files.last().unwrap(), &art.uniform_rows)?;
    }
    if !art.temporal_rows.is_empty() {
        files.push(dir.join("temporal.csv"));
        write_csv(files.last().unwrap(), &art.temporal_rows)?;
    }
    if !art.steps.is_empty() {
        files.push(dir.join("steps.csv"));
        write_csv(files.last().unwrap(), &art.steps)?;
    }
    for s in &art.snapshots {
        let path = dir.join(format!("{}.vtu", s.name));
        write_vtu(&path, &s.mesh, Some(&s.state), &[("indicator", &s.indicator)])?;
        files.push(path);
    }
    let manifest = Manifest {
        provenance: provenance(),
        config: art.config.clone(),
        phases: art.phases.clone(),
        rows: art.rows.clone(),
        uniform_rows: art.uniform_rows.clone(),
        temporal_rows: art.temporal_rows.clone(),
        steps: art.steps.clone(),
        eoc: art.eoc.clone(),
        temporal_eoc: art.temporal_eoc.clone(),
        comparisons: art.comparisons.clone(),
        checks: art.checks.clone(),
        files: files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(files)
}
