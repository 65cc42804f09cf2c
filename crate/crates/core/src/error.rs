use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("architecture mismatch: target {target:?} vs online {online:?}")]
    ArchitectureMismatch { target: Vec<usize>, online: Vec<usize> },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("training diverged at step {step}: {detail}")]
    Diverged { step: u64, detail: String },
    #[error("state not in dataset")]
    StateNotInDataset,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("missing input file {0}")]
    MissingFile(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
