use thiserror::Error;

/// Errors raised by graph construction, the likelihood, and the estimator.
#[derive(Debug, Error)]
pub enum Error {
    /// Input rows violate a structural rule of the network data model.
    #[error("validation error in {table} row {row}: {message}")]
    Validation {
        table: &'static str,
        row: usize,
        message: String,
    },

    /// An argument lies outside the domain of a density or transform.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed (singular system, non-finite objective, bracket failure).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The estimator could not be started from the supplied data.
    #[error("initialization error: {0}")]
    Initialization(String),

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn validation(table: &'static str, row: usize, message: impl Into<String>) -> Self {
        Error::Validation {
            table,
            row,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
