use thiserror::Error;

/// Errors reported by the command-line front end. Each maps to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid experiment file, bad flags, malformed oracle instance.
    #[error("{0}")]
    Config(String),
    /// Failure while the experiment runs or outputs are written.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<flowlearn::Error> for CliError {
    fn from(e: flowlearn::Error) -> Self {
        match e {
            flowlearn::Error::Config { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
