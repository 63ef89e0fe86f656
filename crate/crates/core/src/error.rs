//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors surfaced by the simulator.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration or precondition violation.
    Config(String),
    /// Scene generation could not satisfy its constraints.
    Generation(String),
    /// Numerical failure (divergence, non-finite values).
    Numeric(String),
    /// A link carries no usable paths (all-zero objective or empty path set).
    NoLink,
    /// Tensor/layer shape disagreement.
    ShapeMismatch(String),
    /// Index or value outside its documented domain.
    OutOfRange(String),
    /// Underlying I/O failure.
    Io(io::Error),
    /// Malformed on-disk artifact (bad magic, version, or payload).
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Generation(msg) => write!(f, "generation failure: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::NoLink => write!(f, "no usable propagation path between endpoints"),
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}
