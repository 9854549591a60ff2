use thiserror::Error;

/// Errors surfaced by barrier geometry, walkers, trackers and drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// The queried point is not strictly inside the body.
    #[error("point is not strictly interior to the body")]
    NotInterior,
    /// A factorization or other floating-point computation failed.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// An iterative method hit its iteration cap.
    #[error("no convergence: {0}")]
    Convergence(String),
    /// Inconsistent or incomplete configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The operation is not available for these inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
