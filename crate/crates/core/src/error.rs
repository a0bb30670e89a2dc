use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across loading, sampling, training and search.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Load {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("vocabulary error: {0}")]
    Vocabulary(String),
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("knowledge graph is already augmented with inverse relations")]
    AlreadyAugmented,
    #[error("non-finite loss at step {step} (query {query})")]
    NonFiniteLoss { step: usize, query: usize },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("search error: {0}")]
    Search(String),
    #[error("logic error: {0}")]
    Logic(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
