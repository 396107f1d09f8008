use thiserror::Error;

/// Errors produced by the library.
///
/// `Input` covers malformed arguments and files (CLI exit code 2), while
/// `Rejection` marks mathematically valid input that fails a required
/// hypothesis (CLI exit code 1).
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("rejected: {0}")]
    Rejection(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn rejection(msg: impl Into<String>) -> Self {
        Error::Rejection(msg.into())
    }

    /// Process exit code under the CLI contract: 1 for mathematical
    /// rejection, 2 for input/parse problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Rejection(_) => 1,
            _ => 2,
        }
    }
}
