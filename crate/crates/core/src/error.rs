use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum CgflError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("{}:{line}: {message}", file.display())]
    Ingestion {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("degenerate degree: node type `{0}` has zero average degree")]
    DegenerateDegree(String),

    #[error("task construction failed: {0}")]
    TaskConstruction(String),

    #[error("training diverged at epoch {epoch}: meta loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CgflError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CgflError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CgflError::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CgflError>;
