//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input or parameter array had the wrong length.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A non-finite value surfaced where the computation requires finite ones.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// The requested operation does not exist for this variant (e.g. skill
    /// enumeration on a continuous space).
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A model was queried before it was fitted or frozen.
    #[error("uninitialized model: {0}")]
    Uninitialized(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// A training iteration failed for a non-recoverable reason.
    #[error("iteration {iteration} failed: {source}")]
    Training {
        iteration: u64,
        #[source]
        source: Box<Error>,
    },

    /// The environment produced or received a state/action it cannot handle.
    #[error("environment fault: {0}")]
    EnvFault(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::ShapeMismatch {
            context,
            expected,
            got,
        }
    }
}
