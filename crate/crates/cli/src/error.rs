use thiserror::Error;

/// Command failure, classified for the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn runtime(context: &str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime(format!("{context}: {e}"))
    }
}

impl From<driftguard::Error> for CliError {
    fn from(e: driftguard::Error) -> Self {
        use driftguard::Error as E;
        match e {
            E::InvalidParameter(_) | E::UnknownKey(_) => CliError::Config(e.to_string()),
            e if e.is_data_error() => CliError::Data(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
