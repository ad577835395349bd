use std::path::PathBuf;

use thiserror::Error;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "instance generation failed after {attempts} attempts (union never covered the universe)"
    )]
    GenerationFailure { attempts: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(Violation),

    #[error("sets do not satisfy give-and-take")]
    GtViolation,

    #[error("nodes {0} and {1} do not satisfy give-and-take")]
    GtViolationAt(usize, usize),

    #[error("inconsistent preference lists: node {0} lists node {1} but they are not linked")]
    InconsistentLists(usize, usize),

    #[error("oracle search budget exceeded after {explored} states")]
    BudgetExceeded { explored: u64 },

    #[error("price of choices is only defined when every node has zero aggressive probability")]
    SapNonzero,

    #[error("price of choices undefined for a zero terminal aggregate")]
    ZeroAggregate,

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_) | Error::InvalidInstance(_) | Error::Parse { .. }
        )
    }
}
