use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    /// Every slot was non-empty in every round, so the mean statistic is 1
    /// and the expected-value curve cannot be inverted.
    #[error("saturated: mean statistic reached 1, frame too small for the population")]
    Saturated,

    #[error("inconsistent observation: {0}")]
    InconsistentObservation(String),

    #[error("no observations supplied")]
    EmptyInput,

    #[error("observations mix frame sizes {first} and {other}")]
    MixedFrameSizes { first: usize, other: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}
