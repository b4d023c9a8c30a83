use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A file could not be read, parsed or written.
    #[error("i/o error: {0}")]
    Io(String),
    /// A parameter violates a documented invariant.
    #[error("invalid parameter: {0}")]
    Validation(String),
    /// A numerical procedure could not produce a result
    /// (singular covariance, no sign change in a root bracket, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// Process exit code: 2 for I/O, 3 for validation, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Validation(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}

pub(crate) fn io_error(msg: impl Into<String>) -> Error {
    Error::Io(msg.into())
}
