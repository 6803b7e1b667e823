use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = NestError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NestError {
    #[error("dimension error in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("non-finite value produced by `{op}`")]
    NonFinite { op: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error at line {line}: {detail}")]
    Data { line: usize, detail: String },

    #[error("invalid scenario `{scenario}`: {detail}")]
    Scenario { scenario: String, detail: String },

    #[error("checkpoint config hash mismatch: checkpoint has {checkpoint}, config has {config}")]
    ConfigHash { checkpoint: String, config: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NestError {
    pub(crate) fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        NestError::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NestError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            NestError::Usage(_) | NestError::Param(_) => 1,
            NestError::NonFinite { .. } | NestError::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
