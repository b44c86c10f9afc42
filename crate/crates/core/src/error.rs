use thiserror::Error;

#[derive(Debug, Error)]
pub enum BankError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("labels must be 0 or 1, found {value} at row {row}")]
    InvalidLabel { row: usize, value: f64 },

    #[error("predictive variance undefined: posterior shape {shape} must exceed 1 (mean {mean})")]
    UndefinedVariance { shape: f64, mean: f64 },

    #[error("non-finite log-evidence at iteration {iteration}; state dump:\n{dump}")]
    NonFiniteEvidence { iteration: usize, dump: String },

    #[error("empty trace: no samples were kept")]
    EmptyTrace,

    #[error("{0}")]
    Data(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BankError>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(BankError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
