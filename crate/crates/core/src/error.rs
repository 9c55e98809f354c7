//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration: bad widths, empty inputs, violated preconditions.
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor/batch dimension mismatch.
    #[error("shape error in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// Non-finite value encountered where a finite one is required.
    #[error("numeric error in {context}: {value}")]
    Numeric { context: &'static str, value: f64 },

    /// Fixed-point inversion failed to converge (Lipschitz bound likely violated).
    #[error("flow inversion did not converge after {iters} iterations (residual {residual:.3e})")]
    Inversion { residual: f64, iters: usize },

    /// A ranking metric was requested on a degenerate label set.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
