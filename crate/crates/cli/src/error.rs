use std::fmt::Display;

use thiserror::Error;

/// Failure of one command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// bad or inconsistent configuration; exit code 1
    #[error("config error: {0:#}")]
    Config(anyhow::Error),
    /// anything that went wrong while doing the work; exit code 2
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn config(msg: impl Display) -> Self {
        CliError::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn runtime(msg: impl Display) -> Self {
        CliError::Runtime(anyhow::anyhow!("{msg}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches context and an exit class to any error.
pub trait ErrorClass<T> {
    fn or_config<C: Display + Send + Sync + 'static>(self, context: impl FnOnce() -> C) -> CliResult<T>;
    fn or_runtime<C: Display + Send + Sync + 'static>(self, context: impl FnOnce() -> C) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> ErrorClass<T> for Result<T, E> {
    fn or_config<C: Display + Send + Sync + 'static>(self, context: impl FnOnce() -> C) -> CliResult<T> {
        self.map_err(|e| CliError::Config(e.into().context(context())))
    }
    fn or_runtime<C: Display + Send + Sync + 'static>(self, context: impl FnOnce() -> C) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into().context(context())))
    }
}
