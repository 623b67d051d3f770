use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("port {port} out of range for a {ports}-port device")]
    InvalidPort { port: usize, ports: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("comb has no tooth with nonzero power")]
    EmptyComb,

    #[error("kernel of length {k} does not fit a {ports}-port AWGR")]
    KernelTooLong { k: usize, ports: usize },

    #[error("comb with {teeth} teeth covers fewer than two full FSRs ({needed} teeth required)")]
    InsufficientComb { teeth: usize, needed: usize },

    #[error("weight {value} at offset {offset} exceeds 1; normalize the kernel first")]
    Normalization { offset: usize, value: f64 },

    #[error("kernel is all zeros")]
    DegenerateKernel,

    #[error("value {value} at index {index} is outside [{lo}, {hi}]")]
    Range {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("calibration did not converge: residual {residual:.3e} of signal RMS")]
    CalibrationFailed { residual: f64 },

    #[error("insufficient signal channels: {needed} needed, {available} available (short by {})", needed - available)]
    Capacity { needed: usize, available: usize },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("idx format: {0}")]
    Idx(String),

    #[error("model container: {0}")]
    ModelFormat(String),

    #[error("{path}: {message}")]
    Validation { path: String, message: String },

    #[error("missing fixture {0}")]
    MissingFixture(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
