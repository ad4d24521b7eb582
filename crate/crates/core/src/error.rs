use thiserror::Error;

/// Errors produced by the kernel log-rank library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a precondition (lengths, finiteness, domains).
    #[error("validation error: {0}")]
    Validation(String),

    /// A cell or flag could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A numeric procedure failed (degenerate data, bracketing failure, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unknown scenario id '{0}'")]
    UnknownScenario(String),

    #[error("unknown kernel label '{0}' (expected one of lin1, gau1, fis1, gaugau)")]
    UnknownKernel(String),
}

impl Error {
    /// Process exit code the CLI maps this error to: 2 for usage/validation
    /// problems, 3 for internal numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::Parse(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::UnknownScenario(_)
            | Error::UnknownKernel(_) => 2,
            Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
