//! Library-wide error type.

use crate::quad::QuadFail;

#[derive(Debug)]
pub enum Error {
    /// Density parameters violate an invariant (e.g. gamma >= d for the pure power profile).
    InvalidSpec(String),
    /// An argument is outside an operation's domain.
    InvalidArgument(String),
    /// Adaptive quadrature gave up; carries the worst cell.
    Quadrature(QuadFail),
    /// A series or iteration did not meet its certificate within its cap.
    NonConvergence(String),
    Io(std::io::Error),
    Format(String),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::InvalidSpec(s) => write!(f, "invalid density spec: {s}"),
            Error::InvalidArgument(s) => write!(f, "invalid argument: {s}"),
            Error::Quadrature(d) => write!(f, "{d}"),
            Error::NonConvergence(s) => write!(f, "did not converge: {s}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format(s) => write!(f, "format error: {s}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<QuadFail> for Error {
    fn from(d: QuadFail) -> Self {
        Error::Quadrature(d)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
