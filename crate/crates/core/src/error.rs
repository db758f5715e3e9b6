use std::io;

use thiserror::Error;

/// Errors produced anywhere in the encoding, training and evaluation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid harmonic index (l={l}, m={m}): |m| must not exceed l")]
    InvalidDegree { l: usize, m: i64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("bandlimit mismatch: expected {expected}, got {got}")]
    BandlimitMismatch { expected: usize, got: usize },

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("point cloud too sparse for bandlimit {bandlimit}: {unfilled} of {total} nodes unfilled")]
    SparseCloud {
        bandlimit: usize,
        unfilled: usize,
        total: usize,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("stale activation cache: network changed since the forward pass")]
    StaleCache,

    #[error("network is frozen")]
    Frozen,

    #[error("training failed: {0}")]
    Training(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {kind} data: {msg}")]
    Format { kind: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(kind: &'static str, msg: impl Into<String>) -> Self {
        Error::Format {
            kind,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
