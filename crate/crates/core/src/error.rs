use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("matrix is singular: {0}")]
    Singular(String),

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("regime guard violated: {0}")]
    Guard(String),

    #[error("postcondition failed: {0}")]
    Postcondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
