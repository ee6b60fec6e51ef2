use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point too close to a nonsmooth locus (margin {margin:e}, required > {required:e})")]
    Locus { margin: f64, required: f64 },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("dimension {got} unsupported (max {max})")]
    UnsupportedDimension { got: usize, max: usize },

    #[error("inverse solve failed: {0}")]
    NoInverse(String),

    #[error("singular Jacobian at iterate")]
    SingularJacobian,

    #[error("invalid state: {0}")]
    State(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
