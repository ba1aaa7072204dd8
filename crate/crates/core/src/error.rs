use std::io;
use std::path::Path;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("character index {index} out of range for vocabulary of size {size}")]
    Vocabulary { index: usize, size: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Ingestion {
        path: String,
        line: usize,
        message: String,
    },

    #[error("evaluation error at line {line}: {message}")]
    Evaluation { line: usize, message: String },

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint error at byte {offset}: {message}")]
    Checkpoint { offset: u64, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Error::Io {
            context: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for the command line front end:
    /// 1 usage/config, 2 data, 3 training failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::NonFiniteLoss { .. } | Error::NonFiniteGradient(_) => 3,
            Error::Dimension { .. }
            | Error::Domain(_)
            | Error::Vocabulary { .. }
            | Error::Ingestion { .. }
            | Error::Evaluation { .. }
            | Error::Measurement(_)
            | Error::Checkpoint { .. }
            | Error::Io { .. } => 2,
        }
    }
}
