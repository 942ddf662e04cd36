use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown category {value:?} for feature {feature:?}")]
    UnknownCategory { feature: String, value: String },

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-numeric cell {value:?} in column {column:?} (row {row})")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("value {value} of feature {feature:?} outside declared bounds")]
    OutOfBounds { feature: String, value: f64 },

    #[error("one-hot block of feature {0:?} does not hold exactly one active category")]
    InvalidOneHot(String),

    #[error("discrete feature {feature:?} decodes to non-integral value {value}")]
    NonIntegralDiscrete { feature: String, value: f64 },

    #[error("width mismatch: expected {expected}, got {actual}")]
    WidthMismatch { expected: usize, actual: usize },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corrupt weights: {0}")]
    CorruptWeights(String),

    #[error("model process exited: {0}")]
    ProcessExit(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("model process did not answer within {0:?}")]
    Timeout(std::time::Duration),

    #[error("fingerprint mismatch: {0}")]
    FingerprintMismatch(String),

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("coverage is empty")]
    EmptyCoverage,

    #[error("no ball of a target class exists in the coverage")]
    NoOpposingBalls,

    #[error("coverage does not match the active dataset or predictor: {0}")]
    CoverageMismatch(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("evaluation sample is empty")]
    EmptyEvaluation,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
