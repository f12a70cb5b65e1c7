use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the detector pipeline.
#[derive(Debug, Error)]
pub enum RhoError {
    #[error("node id out of range in edge ({src}, {dst}) for graph with {n} nodes")]
    NodeOutOfRange { src: usize, dst: usize, n: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("graph has {n} nodes, above the dense oracle cap of {cap}")]
    OracleCapExceeded { n: usize, cap: usize },

    #[error("metric is undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("row count mismatch: {0}")]
    RowCountMismatch(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RhoError>;

impl RhoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RhoError::Io {
            path: path.into(),
            source,
        }
    }
}
