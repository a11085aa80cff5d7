use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate triangle {triangle}: signed area {area:e}")]
    DegenerateTriangle { triangle: usize, area: f64 },

    /// Malformed or non-conforming input file. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("linear solver failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("Newton solver failed after {iterations} iterations (residual history {history:?})")]
    Newton { iterations: usize, history: Vec<f64> },

    #[error("active-set oracle did not converge after {iterations} iterations (active-set sizes {active_sizes:?})")]
    Oracle { iterations: usize, active_sizes: Vec<usize> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
