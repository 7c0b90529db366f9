use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported dimension {dims} (at most {max} supported)")]
    UnsupportedDimension { dims: usize, max: usize },

    #[error("numerical divergence at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    #[error("kernel matrix is ill-conditioned: Cholesky failed with jitter up to {max_jitter:e}")]
    IllConditioned { max_jitter: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("optimization failed at iteration {iteration}: {detail} (objective trace: {trace:?})")]
    OptimizationFailed {
        iteration: usize,
        detail: String,
        trace: Vec<f64>,
    },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
