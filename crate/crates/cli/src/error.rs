use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("graph has {} error(s)", .0.len())]
    Validate(Vec<String>),
    #[error("{0}")]
    Execute(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Serve(#[from] provcube_service::http::ServeError),
    #[error(transparent)]
    Config(#[from] provcube_service::ConfigError),
}

impl CliError {
    pub const USAGE: u8 = 64;

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validate(_) => 3,
            CliError::Execute(_) => 4,
            CliError::Io { .. } | CliError::Serve(_) => 5,
            CliError::Usage(_) | CliError::Config(_) => Self::USAGE,
        }
    }
}
