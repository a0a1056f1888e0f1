//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Tensor shape mismatch; names the operation and both shapes.
    Shape { op: &'static str, detail: String },
    /// Invalid configuration value or config file.
    Config(String),
    /// Dataset, checkpoint, or file-format problem.
    Data(String),
    /// Non-finite value where one is not allowed (NaN/Inf in loss or grad).
    Numeric(String),
    /// Protocol misuse (empty memory, double backward, degenerate prompt).
    State(String),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "shape error in {op}: {detail}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::State(msg) => write!(f, "invalid state: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<image::ImageError> for Error {
    fn from(e: image::ImageError) -> Self {
        Error::Data(format!("image codec: {e}"))
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape { .. } => 2,
            Error::Data(_) | Error::Io(_) | Error::State(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
