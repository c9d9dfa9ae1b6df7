use std::io;

use thiserror::Error;

/// Errors raised by the fusion library.
#[derive(Debug, Error)]
pub enum FusionError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("class {0} has no training patches")]
    EmptyClass(usize),

    #[error("internal numeric error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, FusionError>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(FusionError::Parameter(msg.into()))
}
