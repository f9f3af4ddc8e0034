use thiserror::Error;

#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("entry ({row}, {col}) has no solving circuit")]
    Unestimable { row: usize, col: usize },

    #[error("no candidate estimates to combine")]
    NoCandidates,

    #[error("observed entry ({row}, {col}) = {value} is not strictly positive")]
    NonPositive { row: usize, col: usize, value: f64 },

    #[error("degenerate minor: |a1 - a0| = {gap:e} is below tolerance {tol:e}")]
    DegenerateMinor { gap: f64, tol: f64 },

    #[error("column {0} has zero mean; cannot normalize")]
    DegenerateColumn(usize),

    #[error("matrix csv line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CompletionError>;

pub(crate) fn invalid(msg: impl Into<String>) -> CompletionError {
    CompletionError::InvalidInput(msg.into())
}
