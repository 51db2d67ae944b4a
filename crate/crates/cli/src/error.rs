use std::path::PathBuf;

use framescout::ErrorKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{0}")]
    Incompatible(String),

    #[error(transparent)]
    Core(#[from] framescout::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Incompatible(_) => EXIT_DATA,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Provider => EXIT_PROVIDER,
            },
        }
    }
}
