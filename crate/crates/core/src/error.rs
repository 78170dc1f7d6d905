use std::io;

use thiserror::Error;

use crate::scalar::ScalarKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad index pointer: {0}")]
    BadPointer(String),

    #[error("bad block index: {0}")]
    BadIndex(String),

    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("scalar kind mismatch: {left} vs {right}")]
    KindMismatch { left: ScalarKind, right: ScalarKind },

    #[error("lane count {lanes} is not a positive divisor of k={k}")]
    BadLaneCount { lanes: usize, k: usize },

    #[error("tile dimensions must be positive, got {rows}x{cols}")]
    BadTile { rows: usize, cols: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("no candidate passed verification")]
    NoValidCandidate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
