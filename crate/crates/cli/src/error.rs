use thiserror::Error;

/// Failures of a CLI run, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed configuration, or parameters outside a window.
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] tpflow_core::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use tpflow_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidParameter(_) | E::Structural(_)) => 2,
            CliError::Core(E::DomainApproximation(_)) => 3,
            CliError::Core(E::NonConvergence { .. }) => 4,
            CliError::Core(E::Numerical(_)) => 5,
            CliError::Core(E::Io(_)) | CliError::Output { .. } => 1,
        }
    }
}
