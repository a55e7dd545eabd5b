use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical failure: {0}")]
    Numerical(nvtherm_core::Error),
}

impl From<nvtherm_core::Error> for CliError {
    fn from(e: nvtherm_core::Error) -> Self {
        use nvtherm_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::ZeroVector { .. } | E::SequenceOverflow { .. } => {
                CliError::Config(e.to_string())
            }
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}
