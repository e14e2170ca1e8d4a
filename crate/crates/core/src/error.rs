use thiserror::Error;

/// Errors raised by the engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical check failed; `witness` is the offending point, if any.
    #[error("verification failed in {check}: {detail}")]
    Verification {
        check: String,
        detail: String,
        witness: Option<f64>,
    },

    /// Complexity is unbounded (epsilon = 0).
    #[error("competition complexity is infinite for epsilon = 0")]
    InfiniteComplexity,

    /// Solver reached a state that valid input cannot produce.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
