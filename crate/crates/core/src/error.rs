use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("label {0} is not -1 or +1")]
    InvalidLabel(i64),
    #[error("digit {0} is outside 0..=9")]
    InvalidDigit(u8),
    #[error("dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: u64, loss: f64 },
    #[error("eigensolver did not converge")]
    NoConvergence,
    #[error("idx: {0}")]
    Idx(String),
    #[error("pca: {0}")]
    DegenerateCovariance(String),
    #[error("inconsistent endpoint record: {0}")]
    Inconsistent(String),
    #[error("matrix of size {0} exceeds the dense assembly limit")]
    TooLarge(usize),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
