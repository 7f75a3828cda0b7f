use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the model, quadrature, optimization and problem modules.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// A linear solve hit a matrix that is singular to working precision.
    #[error("singular system at p = {p:?} (condition estimate {cond:e})")]
    Singular { p: Vec<Complex64>, cond: f64 },

    /// Adaptive quadrature ran out of subintervals.
    #[error("quadrature did not converge after {intervals} intervals (error estimate {error:e})")]
    Quadrature {
        intervals: usize,
        error: f64,
        estimate: Vec<Complex64>,
    },

    /// An objective or gradient evaluation produced NaN or infinity.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Rank(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
