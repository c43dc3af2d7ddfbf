//! Error type of the experiment harness and its exit-code mapping.

use thiserror::Error;

/// Failures of a harness run.
#[derive(Debug, Error)]
pub enum CliError {
    /// The configuration is unreadable or violates a parameter constraint.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical routine failed during the run.
    #[error(transparent)]
    Core(#[from] fracrep_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

impl CliError {
    /// `2` for configuration errors, `1` for every other failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Validation errors raised by the core library become configuration errors.
pub(crate) fn as_config(e: fracrep_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

pub type CliResult<T> = std::result::Result<T, CliError>;
