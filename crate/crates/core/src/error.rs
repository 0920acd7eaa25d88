use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("softmax row {row} has no unmasked entry")]
    DegenerateAttentionRow { row: usize },

    #[error("empty input to {0}")]
    EmptyInput(&'static str),

    #[error("weights must be positive (entry {index} = {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("matrix is not positive definite after shift: pivot {pivot:e} at column {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("configuration holds {n} particles but capacity is {n_max}")]
    Capacity { n: usize, n_max: usize },

    #[error("particles {i} and {j} coincide")]
    Coincident { i: usize, j: usize },

    #[error("configuration has zero amplitude")]
    ZeroAmplitude,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("non-finite energy at iteration {iteration}")]
    NonFiniteEnergy { iteration: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("operation requires a periodic model")]
    NotPeriodic,

    #[error("operation requires a trapped model")]
    NotTrapped,

    #[error("benchmark not cataloged: {0}")]
    Uncataloged(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("minimum lies at the window edge N = {0}; enlarge the search window")]
    WindowTooSmall(usize),

    #[error("checkpoint not found: {0}")]
    CheckpointNotFound(PathBuf),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
