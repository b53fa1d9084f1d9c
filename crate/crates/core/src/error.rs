use std::path::PathBuf;

use thiserror::Error;

use crate::signal_synth::FaultClass;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max |s_ij - s_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("right-hand matrix is not positive definite after jitter (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigendecomposition did not converge")]
    NoConvergence,

    #[error("{}: malformed value {token:?} at {location}", path.display())]
    Malformed {
        path: PathBuf,
        token: String,
        location: String,
    },

    #[error("{}: file contains no samples", .0.display())]
    EmptyFile(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus has no {class} recording for condition {condition} at fault size {size_in} in")]
    MissingClass {
        class: FaultClass,
        condition: String,
        size_in: f64,
    },

    #[error("class {class} under condition {condition} yields {available} windows, {required} required")]
    InsufficientWindows {
        class: FaultClass,
        condition: String,
        available: usize,
        required: usize,
    },

    #[error("class {0} does not occur in the training labels")]
    ClassAbsent(FaultClass),

    #[error("config: {0}")]
    Config(String),

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

pub type Result<T> = std::result::Result<T, Error>;
