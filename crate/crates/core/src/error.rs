use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown group `{0}`")]
    UnknownGroup(String),

    #[error("degenerate collapsed sample: {0}")]
    Degenerate(String),

    #[error("derivative order {order} exceeds supported maximum {max}")]
    UnsupportedOrder { order: usize, max: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },

    #[error(
        "estimator failed in {failed} of {total} bootstrap resamples (first failure: {first})"
    )]
    Bootstrap {
        failed: usize,
        total: usize,
        first: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    /// True for failures caused by numerically degenerate input rather than
    /// malformed arguments.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Degenerate(_) | Error::NonConvergence { .. } | Error::Bootstrap { .. }
        )
    }
}
