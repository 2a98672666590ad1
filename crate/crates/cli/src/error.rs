use std::path::PathBuf;
use thiserror::Error;

use slugsim_core::SlugError;

pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_SIMULATION: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config field `{field}`: {reason}")]
    Field { field: String, reason: String },

    #[error("section `{section}` is required for experiment `{experiment}`")]
    MissingSection {
        section: &'static str,
        experiment: &'static str,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("simulation failed: {0}")]
    Simulation(#[from] SlugError),
}

impl Clone for CliError {
    fn clone(&self) -> Self {
        match self {
            CliError::Parse(s) => CliError::Parse(s.clone()),
            CliError::Field { field, reason } => CliError::Field {
                field: field.clone(),
                reason: reason.clone(),
            },
            CliError::MissingSection { section, experiment } => CliError::MissingSection { section, experiment },
            CliError::Io { path, source } => CliError::Io {
                path: path.clone(),
                source: std::io::Error::new(source.kind(), source.to_string()),
            },
            CliError::Simulation(e) => CliError::Simulation(e.clone()),
        }
    }
}

impl CliError {
    pub fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Field {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this failure category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Field { .. } | CliError::MissingSection { .. } => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Simulation(_) => EXIT_SIMULATION,
        }
    }
}
