use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sentence: {0}")]
    Validation(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The sentence has no noun to attach a clause to.
    #[error("no insertion point in sentence {0:?}")]
    NoInsertionPoint(String),

    #[error("corpus too small: {0}")]
    Sizing(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (loss = {loss})")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("bad language model file, line {line}: {message}")]
    LmFormat { line: usize, message: String },

    #[error(transparent)]
    Read(#[from] crate::chunk::ReadError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config { field: field.to_string(), message: message.into() }
    }
}
