use std::io;

use thiserror::Error;

/// Errors produced anywhere in the detector pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, channel counts or settings that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a precondition (too short, wrong rate, empty, ...).
    #[error("input error: {0}")]
    Input(String),

    /// A file could not be decoded.
    #[error("format error: {0}")]
    Format(String),

    /// ROC analysis needs both classes in the ground truth.
    #[error("ROC curve is undefined: {0}")]
    UndefinedRoc(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! config_err {
    ($($arg:tt)*) => { $crate::error::Error::Config(format!($($arg)*)) };
}

macro_rules! input_err {
    ($($arg:tt)*) => { $crate::error::Error::Input(format!($($arg)*)) };
}

macro_rules! format_err {
    ($($arg:tt)*) => { $crate::error::Error::Format(format!($($arg)*)) };
}

pub(crate) use {config_err, format_err, input_err};
