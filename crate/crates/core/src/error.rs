use std::path::PathBuf;

use thiserror::Error;

use crate::solver::newton::StepFailure;


/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate tetrahedron {index} (volume {volume:e})")]
    DegenerateElement { index: usize, volume: f64 },

    #[error("meshes are not nested: {0}")]
    NonNested(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("non-finite coefficient value on element {element}")]
    NonFiniteCoefficient { element: usize },

    #[error("coefficient hook `{0}` provides no derivative; assemble with JacobianMode::FiniteDifference instead")]
    MissingDerivative(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e}): {reason}")]
    LinearSolver {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("Newton iteration did not converge: {0}")]
    StepFailure(Box<StepFailure>),

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
