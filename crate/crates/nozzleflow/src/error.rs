//! Crate-wide error type with process exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("admissibility violated: {0}")]
    Admissibility(String),

    #[error("numeric failure at t={t}: {message}")]
    Numeric { t: f64, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numeric(t: f64, msg: impl Into<String>) -> Self {
        Error::Numeric {
            t,
            message: msg.into(),
        }
    }

    /// Exit code used by the command-line driver: 1 config, 2 admissibility,
    /// 3 numeric failure, 4 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Invalid(_) | Error::Io(_) => 1,
            Error::Admissibility(_) => 2,
            Error::Numeric { .. } => 3,
            Error::Verification(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
