use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// Argument of an inverse derivative lies outside the range of `phi'` on `[1, inf)`.
    #[error("argument {arg} outside the range [0, {sup}) of phi' for divergence `{divergence}`")]
    OutOfRange {
        divergence: String,
        arg: f64,
        sup: f64,
    },

    #[error("no root: bracket could not be expanded to a sign change (last bracket [{lo}, {hi}])")]
    NoRoot { lo: f64, hi: f64 },

    #[error("root finder did not converge after {iterations} iterations (best iterate {best})")]
    NoConvergence { iterations: usize, best: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("objective is unbounded below: {0}")]
    Unbounded(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Shape { expected, actual });
    }
    Ok(())
}
