use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] sbs_tfa::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Image { path: PathBuf, message: String },
    #[error("{} assertion(s) failed: {}", .0.len(), .0.join("; "))]
    Assertions(Vec<String>),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Machine-readable category printed on stderr.
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigInvalid",
            CliError::Sim(e) => e.category(),
            CliError::Io { .. } | CliError::Image { .. } => "Io",
            CliError::Assertions(_) => "AssertionFailed",
        }
    }

    /// 2 for configuration and file problems, 3 for physics or plan errors,
    /// 4 for failed assertions.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } | CliError::Image { .. } => 2,
            CliError::Sim(_) => 3,
            CliError::Assertions(_) => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
