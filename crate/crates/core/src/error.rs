use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, phantom, matrix or solver parameters.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A data file that does not follow the expected binary layout.
    #[error("malformed {what} file: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A point or argument outside the domain where a formula is valid.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Exhaustive enumeration would exceed the combinatorial budget.
    #[error("enumeration budget exceeded: {count} subsets > {budget}")]
    Budget { count: u128, budget: u128 },

    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the command line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Io(_) | Error::Format { .. } => 3,
            _ => 4,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Config(err.to_string())
    }
}
