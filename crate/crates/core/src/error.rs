use thiserror::Error;

/// Errors shared across the monitoring pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("csv error at line {line}: {msg}")]
    Csv { line: u64, msg: String },

    #[error("block too short: {len} points, need at least {min}")]
    BlockTooShort { len: usize, min: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("feature set mismatch: model expects {expected}, got {got}")]
    FeatureMismatch { expected: String, got: String },

    #[error("fitting failed at stage {stage}: {msg}")]
    FitFailure { stage: usize, msg: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
