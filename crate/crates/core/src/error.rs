use thiserror::Error;

/// Errors raised by mesh construction, assembly and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} is not positive definite: {hint}")]
    NotPositiveDefinite { what: String, hint: String },

    #[error("{what} has size {size}, above the dense limit {limit}")]
    SizeGuard {
        what: String,
        size: usize,
        limit: usize,
    },

    #[error("singular or ill-posed matrix: {0}")]
    Singular(String),

    #[error("{what} did not converge in {iterations} iterations")]
    NoConvergence { what: String, iterations: usize },

    #[error("krylov breakdown: {0}")]
    Breakdown(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
