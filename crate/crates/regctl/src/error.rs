use std::path::PathBuf;

/// Exit status for a successful invocation.
pub const EXIT_OK: i32 = 0;
/// Exit status when output files could not be written.
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
/// Exit status for a run that stopped at `maxiter` under `--require-convergence`.
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// A configuration problem, tied to the offending key where there is one.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", key.as_deref().map(|k| format!("`{k}`: ")).unwrap_or_default())]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    pub fn at(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        ConfigError {
            key: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),

    #[error("solver failure: {0}")]
    Solver(#[from] regctl_core::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("optimization stopped without converging ({reason} after {iterations} iterations)")]
    NotConverged { reason: &'static str, iterations: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Io { .. } => EXIT_IO,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
        }
    }
}
