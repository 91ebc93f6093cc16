use std::path::PathBuf;

use troubleshoot_core::{BackendError, Error as CoreError};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Malformed binary file (index or cache); `offset` is the byte position.
    #[error("{path}: corrupt file at offset {offset}: {message}")]
    Corrupt {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("not found: {0}")]
    NotFound(String),
}

impl AppError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the caller supplied bad input rather than hitting a runtime failure.
    pub fn is_validation(&self) -> bool {
        match self {
            AppError::Config(_) | AppError::Validation(_) | AppError::NotFound(_) => true,
            AppError::Core(e) => matches!(
                e,
                CoreError::InvalidArgument(_)
                    | CoreError::UnknownLabel(_)
                    | CoreError::MissingLabels(_)
                    | CoreError::DimensionMismatch { .. }
                    | CoreError::NonSquare { .. }
                    | CoreError::EmptyCorpus
                    | CoreError::Integrity(_)
                    | CoreError::Backend(BackendError::Precondition(_))
            ),
            _ => false,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            1
        }
    }
}

pub type Result<T, E = AppError> = std::result::Result<T, E>;
