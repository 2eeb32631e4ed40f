use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition (range, shape, sum-to-one, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A text file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// Window and model were produced with different confidence functions.
    #[error("confidence function mismatch: model uses `{model}`, window uses `{window}`")]
    KappaMismatch { model: String, window: String },

    /// Model file was written by an incompatible version.
    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    /// Model file parsed but violates a structural invariant.
    #[error("malformed model: {0}")]
    Model(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
