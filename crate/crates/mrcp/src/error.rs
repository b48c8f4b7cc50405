use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Exit codes: 0 success, 1 internal error, 2 usage or configuration, 3 invalid data.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },
    #[error("{stage} failed for {context}: {source}")]
    Stage {
        stage: &'static str,
        context: String,
        #[source]
        source: mrcp_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::MissingFile(_) => 2,
            CliError::Parse { .. } | CliError::Stage { .. } => 3,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingFile(path)
        } else {
            CliError::Io { path, source }
        }
    }

    pub fn stage(stage: &'static str, context: impl Into<String>) -> impl FnOnce(mrcp_core::Error) -> Self {
        let context = context.into();
        move |source| CliError::Stage { stage, context, source }
    }
}
