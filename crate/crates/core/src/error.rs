use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// A component received no responsibility or produced a non-positive scale.
    #[error("component {index} is degenerate: {reason}")]
    DegenerateComponent { index: usize, reason: String },

    /// The modified estimator cannot be computed for this fit.
    #[error("invalid input for the modified estimator: {0}")]
    Validity(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
