use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("word of length {len} exceeds truncation depth {depth}")]
    WordTooLong { len: usize, depth: usize },

    #[error("degenerate dyadic interval at level {level}: [{start}, {end}] over {frames} frames")]
    DegenerateDyadic {
        level: usize,
        start: usize,
        end: usize,
        frames: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stale cache: {0}")]
    StaleCache(&'static str),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sequence {id}: {message}")]
    Sequence { id: String, message: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
