use std::path::PathBuf;

use hardy_flow::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    ConfigParse { path: PathBuf, message: String },

    #[error("unknown initial-data family `{0}` (expected gaussian, gaussian-poly, witness or file)")]
    UnknownFamily(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error(transparent)]
    Numerical(#[from] LabError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit status for this error class. Clap uses 2 for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse { .. } => 3,
            CliError::UnknownFamily(_) => 4,
            CliError::Invalid(_) => 5,
            CliError::Integrator(_) => 6,
            CliError::Numerical(LabError::IntegratorFailure(_)) => 6,
            CliError::Numerical(_) => 7,
            CliError::Io { .. } => 8,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
