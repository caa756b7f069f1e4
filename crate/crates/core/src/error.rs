use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{axis} of {size} px is not divisible by {divisor}")]
    NotDivisible {
        axis: &'static str,
        size: usize,
        divisor: usize,
    },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },

    #[error("expected {expected} channel(s), got {actual}")]
    ChannelCount { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pyramid of depth {levels} underflows a {height}x{width} image")]
    DepthUnderflow {
        levels: usize,
        height: usize,
        width: usize,
    },

    #[error("timestep {t} outside 0..={max}")]
    TimestepOutOfRange { t: usize, max: usize },

    #[error("label `{0}` has no exemplars in the pool")]
    UnknownLabel(String),

    #[error("pool is empty")]
    EmptyPool,

    #[error("no eligible tile left in the pool (all reached max_reuse)")]
    PoolExhausted,

    #[error("grid is incomplete: expected {expected} blocks, got {actual}")]
    IncompleteGrid { expected: usize, actual: usize },

    #[error("non-finite latent at step {step} (t = {t})")]
    NonFinite { step: usize, t: usize },

    #[error("tile {tile}: {source}")]
    Tile {
        tile: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad input (shapes, parameters, labels), as
    /// opposed to failures that happen while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::NotDivisible { .. }
            | Error::ShapeMismatch { .. }
            | Error::ChannelCount { .. }
            | Error::InvalidParameter { .. }
            | Error::DepthUnderflow { .. }
            | Error::TimestepOutOfRange { .. }
            | Error::UnknownLabel(_)
            | Error::EmptyPool
            | Error::IncompleteGrid { .. } => true,
            Error::Tile { source, .. } => source.is_validation(),
            Error::PoolExhausted
            | Error::NonFinite { .. }
            | Error::Image { .. }
            | Error::Io(_) => false,
        }
    }
}
