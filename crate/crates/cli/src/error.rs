use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation.
    #[error("{0}")]
    Usage(String),
    /// The scenario file is unreadable or describes an invalid run.
    #[error("config: {0}")]
    Config(String),
    /// Anything that goes wrong once work has started.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Runtime(_) => ExitCode::from(1),
            CliError::Usage(_) | CliError::Config(_) => ExitCode::from(2),
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        })*
    };
}

runtime_from!(
    kinex_core::analysis::AnalysisError,
    kinex_core::engine::EngineError,
    kinex_core::ingest::IngestError,
    kinex_core::open_system::OpenSystemError,
    kinex_core::persist::PersistError,
    std::io::Error
);
