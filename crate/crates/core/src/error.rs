use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by model construction, estimation and analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs disagree on dimension or shape.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A value violates a model invariant or an operation's precondition.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The request is well-formed but undefined for this input
    /// (e.g. a long-run matrix of an unstable model).
    #[error("{0}")]
    Domain(String),

    /// Eigenvalue iteration failed, a matrix was numerically singular, etc.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A simulated trajectory left the representable range.
    #[error("trajectory overflow at step {index} (component {component}): |x| exceeded 1e100 or became non-finite")]
    Overflow { index: i64, component: usize },

    /// Not enough effective observations to estimate the requested model.
    #[error("insufficient samples: {available} effective rows, at least {required} required")]
    InsufficientSamples { available: usize, required: usize },

    /// Least-squares design is rank deficient.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Malformed input file.
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn parse(row: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            row,
            message: msg.into(),
        }
    }

    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}
