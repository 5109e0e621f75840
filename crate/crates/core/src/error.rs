use thiserror::Error;

/// Errors produced by the lab's kernels, samplers and drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("{what} = {got} exceeds the guard of {max}")]
    GuardExceeded {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("promise failure: rejection rate {rate:.4} after {attempts} attempts")]
    PromiseFailure { rate: f64, attempts: u64 },

    #[error("coordinate {index} out of range for input of length {len}")]
    OutOfRange { index: usize, len: usize },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn guard(what: &'static str, got: usize, max: usize) -> Result<()> {
    if got > max {
        Err(Error::GuardExceeded { what, got, max })
    } else {
        Ok(())
    }
}
