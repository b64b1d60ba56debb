use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

/// Failures of a command, grouped by the exit status they map to.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input files that do not follow the documented layout or rules.
    #[error("schema error: {0}")]
    Schema(String),

    /// Estimation or scoring broke down numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Bad flag or config-file value.
    #[error("configuration error: {0}")]
    Config(String),

    /// A model applied to data it was not fitted on, or a similar misuse.
    #[error("incompatible inputs: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Io { .. } => 3,
            CliError::Schema(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Config(_) => 6,
            CliError::Mismatch(_) => 7,
        })
    }
}

impl From<tci_core::Error> for CliError {
    fn from(e: tci_core::Error) -> Self {
        use tci_core::Error as E;
        match e {
            E::Validation { .. } | E::Domain(_) => CliError::Schema(e.to_string()),
            E::Numerical(_) | E::Initialization(_) => CliError::Numerical(e.to_string()),
            E::Config(_) => CliError::Config(e.to_string()),
            E::Contract(_) => CliError::Mismatch(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
