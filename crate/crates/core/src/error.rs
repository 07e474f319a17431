//! Error type shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("evidence corrupt: {0}")]
    EvidenceCorrupt(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
