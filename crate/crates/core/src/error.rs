use thiserror::Error;

/// Errors produced by the rank, calibration and simulation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("size mismatch: {left} points vs {right} points")]
    SizeMismatch { left: usize, right: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("argument outside the domain of {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("tied observations at rows {first} and {second}; enable jitter to break ties")]
    TiedObservations { first: usize, second: usize },

    #[error("problem of size {n} exceeds the limit {max}")]
    TooLarge { n: usize, max: usize },

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("unsupported reference distribution: {0}")]
    UnsupportedReference(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            func,
            detail: detail.into(),
        }
    }
}
