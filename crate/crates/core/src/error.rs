use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel is singular on the diagonal (x = y)")]
    SingularEvaluation,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite weight at {0}")]
    Overflow(String),

    #[error("grid has no symmetry map")]
    MissingSymmetry,

    #[error("function is identically zero")]
    ZeroFunction,

    #[error("dense oracle requires p = 2, got p = {0}")]
    OracleExponent(f64),

    #[error("level {k} outside (0, max u)")]
    LevelOutOfRange { k: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
