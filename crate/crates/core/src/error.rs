use std::io;

use thiserror::Error;

/// Errors surfaced by the engine.
#[derive(Debug, Error)]
pub enum ArmtError {
    /// Operand shapes or group sizes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Bad user input: invalid config values, token ids, empty sequences.
    #[error("input error: {0}")]
    Input(String),

    /// A node was executed out of dependency order or twice in a group.
    #[error("scheduling error: {0}")]
    Schedule(String),

    /// Malformed weight container.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = ArmtError> = std::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::ArmtError::Dimension(format!($($arg)*))
    };
}

macro_rules! input_err {
    ($($arg:tt)*) => {
        $crate::error::ArmtError::Input(format!($($arg)*))
    };
}

pub(crate) use dim_err;
pub(crate) use input_err;
