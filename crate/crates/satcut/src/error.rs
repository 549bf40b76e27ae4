//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed trace for agent {agent}: {detail}")]
    MalformedTrace { agent: usize, detail: String },

    #[error("time {t} ticks outside [0, {horizon}] for agent {agent}")]
    OutOfRange { agent: usize, t: i64, horizon: i64 },

    #[error("protocol violation on agent {agent}: {detail}")]
    Protocol { agent: usize, detail: String },

    #[error("FIFO violation on channel {src}->{dst}: {detail}")]
    Fifo {
        src: usize,
        dst: usize,
        detail: String,
    },

    #[error("ingestion error at {location}: {detail}")]
    Ingest { location: String, detail: String },

    #[error("structural invariant violation: {0}")]
    Structural(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
