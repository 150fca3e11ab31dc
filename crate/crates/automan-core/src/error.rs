use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation was given tensors whose shapes do not fit its contract.
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// An operation was called with an argument outside its domain.
    #[error("{op}: {msg}")]
    InvalidArg { op: &'static str, msg: String },

    /// A forward or backward pass produced a non-finite value.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// Problems with input files or their contents.
    #[error("data error ({location}): {msg}")]
    Data { location: String, msg: String },

    /// Schema violations: duplicate names, missing target, kind mismatches.
    #[error("schema error: {0}")]
    Schema(String),

    /// Training or fitting diverged.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArg {
            op,
            msg: msg.into(),
        }
    }

    pub fn data(location: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Data {
            location: location.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
