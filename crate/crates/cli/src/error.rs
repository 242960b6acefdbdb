use thiserror::Error;

/// Failures surfaced to the command line, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or malformed files, invalid configuration.
    #[error("{0}")]
    Input(String),
    /// The data cannot be tested, e.g. a coordinate with zero variance.
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl From<hdmt_core::Error> for CliError {
    fn from(e: hdmt_core::Error) -> Self {
        match e {
            hdmt_core::Error::DegenerateVariance { .. } | hdmt_core::Error::RetriesExhausted { .. } => {
                CliError::Degenerate(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("I/O error: {e}"))
    }
}
