use std::fmt;

use cpcode::Error as CoreError;
use cpcode::{CodeError, IoError, MasterError, PeelError, PlanError, RsError};

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 1.
    #[error("configuration error: {0}")]
    Config(String),
    /// Exit code 2.
    #[error("decode failed: {0}")]
    Decode(String),
    /// Exit code 3.
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Decode(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        CliError::Io(msg.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<CodeError> for CliError {
    fn from(e: CodeError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<RsError> for CliError {
    fn from(e: RsError) -> Self {
        match e {
            RsError::SingularSystem | RsError::NotEnoughResponses { .. } => CliError::Decode(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<PeelError> for CliError {
    fn from(e: PeelError) -> Self {
        CliError::Decode(e.to_string())
    }
}

impl From<MasterError> for CliError {
    fn from(e: MasterError) -> Self {
        match e {
            MasterError::Plan(p) => p.into(),
            MasterError::Rs(r) => r.into(),
            MasterError::Matrix(m) => CliError::Config(m.to_string()),
            other => CliError::Decode(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(e) => e.into(),
            CoreError::Peel(e) => e.into(),
            CoreError::Master(e) => e.into(),
            CoreError::Rs(e) => e.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<cpcode::SimError> for CliError {
    fn from(e: cpcode::SimError) -> Self {
        CliError::Config(e.to_string())
    }
}
