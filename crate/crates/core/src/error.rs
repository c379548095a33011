use thiserror::Error;

/// Errors surfaced by the training engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix dimensions do not line up for the requested operation.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A caller-supplied value violates a precondition (bad index, zero size, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("singular or indefinite matrix: {0}")]
    Singular(String),

    /// An update became numerically degenerate (vanishing pivot or Schur block).
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// The operation requires state the object does not have (e.g. untrained model).
    #[error("invalid state: {0}")]
    State(String),

    /// File content could not be parsed (CSV or model file).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
