use thiserror::Error;

/// Errors reported by the reconstruction library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("Gram matrix is singular (min eigenvalue {min_eig:e}, max eigenvalue {max_eig:e})")]
    SingularGram { min_eig: f64, max_eig: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigensolver did not converge")]
    EigenNoConvergence,

    #[error("denominator quadratic form is degenerate")]
    DegenerateDenominator,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("linearly dependent constraints: {0}")]
    DependentConstraints(String),

    #[error("Kraus rank {n_s} out of range 1..={max}")]
    RankOutOfRange { n_s: usize, max: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
