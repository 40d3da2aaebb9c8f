use std::path::Path;

use feddct_core::config::ConfigError;
use feddct_core::engine::EngineError;
use thiserror::Error;

use crate::trace::TraceError;

/// Exit codes: 0 success, 2 config error, 3 i/o error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("incompatible configs: `{field}` differs between runs being compared")]
    IncompatibleConfigs { field: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::IncompatibleConfigs { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Engine(EngineError::Config(_)) => 2,
            CliError::Engine(_) | CliError::Trace(_) => 1,
        }
    }
}
