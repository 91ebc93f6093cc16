use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::BackendError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("vector length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("unknown team label `{0}`")]
    UnknownLabel(String),
    #[error("tickets without team label: {}", .0.join(", "))]
    MissingLabels(Vec<String>),
    #[error("corpus integrity: {0}")]
    Integrity(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("parse error: {message}")]
    Parse { message: String, raw: String },
    #[error("every candidate generation failed: {0}")]
    AllCandidatesFailed(BackendError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
