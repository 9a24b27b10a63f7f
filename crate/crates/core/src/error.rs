use std::path::PathBuf;

use thiserror::Error;

use crate::fields::Dims;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid {dims} is smaller than {min} nodes along an active axis")]
    DimensionUnderflow { dims: Dims, min: usize },

    #[error("node {coords:?} outside grid {dims}")]
    OutOfRange { coords: [usize; 3], dims: Dims },

    #[error("cannot allocate {bytes} bytes: {reason}")]
    Allocation { bytes: usize, reason: String },

    #[error("relaxation rate omega = {0} gives non-positive viscosity (need 0 < omega < 2)")]
    Relaxation(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("configuration has {} error(s):\n{}", .0.len(), .0.join("\n"))]
    ConfigErrors(Vec<String>),

    #[error("boundary specification: {0}")]
    Boundary(String),

    #[error("non-finite value in {field} at step {step}, node {coords:?}")]
    NonFinite {
        field: &'static str,
        step: u64,
        coords: [usize; 3],
    },

    #[error("{0}")]
    Analysis(String),

    #[error("zero elapsed time")]
    ZeroElapsed,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
