use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// An input vector contained NaN or infinity.
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    /// A precondition on parameters was violated (no result exists).
    #[error("domain error: {0}")]
    Domain(String),

    /// An iteration failed to converge within its budget.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// A quadrature truncation or tail estimate exceeded its tolerance.
    #[error("quadrature: {0}")]
    Quadrature(String),

    /// Grids or samplings do not match.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Insufficient line coverage for a reconstruction step.
    #[error("coverage: {0}")]
    Coverage(String),

    /// Malformed file content.
    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
