use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the domain of an operation (unordered positions, bad parameters, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A kernel produced a non-finite value, typically from gaps close to the underflow range.
    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("newton iteration did not converge after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("no critical point found (residual {residual:e} after {iters} iterations)")]
    NoCriticalPoint { residual: f64, iters: usize },

    /// A limiting profile whose normalized gaps still oscillate over the tail.
    #[error("limiting profile did not settle (relative oscillation {oscillation:.3} over the tail)")]
    NonConvergent {
        oscillation: f64,
        last_profile: Vec<f64>,
    },

    #[error("no unit configuration with nonnegative energy was found")]
    EmptyCone,

    #[error("invalid input: {0}")]
    Input(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}
