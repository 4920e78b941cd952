use std::path::PathBuf;

use thiserror::Error;

use crate::fairness::GroupId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside its admissible domain (intensity not in [0,1], label out of range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A rate whose denominator is zero. Never reported as a silent zero.
    #[error("undefined {rate} for group(s) {groups:?}")]
    UndefinedRate {
        rate: &'static str,
        groups: Vec<GroupId>,
    },

    #[error("need at least {needed} groups, found {found}")]
    InsufficientGroups { needed: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid deployment profile: {0}")]
    Profile(String),

    #[error("trajectory sequencing error: {0}")]
    Sequencing(String),

    #[error("non-finite loss at batch {batch}")]
    NonFiniteLoss { batch: usize },

    #[error("unsupported features: {0}")]
    UnsupportedFeature(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: {message}", path.display())]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("profile {index}: {source}")]
    AtProfile {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
