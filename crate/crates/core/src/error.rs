use std::io;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("phase error: {0}")]
    Phase(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit status used by the `ftlab` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Hypothesis(_)
            | Error::Constraint(_)
            | Error::Geometry(_)
            | Error::Resolution(_)
            | Error::Phase(_)
            | Error::InsufficientData(_)
            | Error::Domain(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
