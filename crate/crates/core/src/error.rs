//! Crate-wide error type. Callers that need to distinguish "you passed the
//! wrong thing" from "the numerics blew up" can match on the variants; the
//! command-line layer maps them onto distinct exit codes.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Tensor shapes did not line up for the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller-supplied argument was rejected (bad geometry, bad config
    /// value, unsupported audio format, malformed manifest, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Training or evaluation produced a non-finite or otherwise unusable
    /// numeric result.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Filesystem trouble, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file existed but its contents did not parse as the expected format.
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
