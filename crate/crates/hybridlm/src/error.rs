use std::fmt;
use std::path::{Path, PathBuf};

use hybridlm_core::datagen::DatagenError;
use hybridlm_core::planner::PlannerError;
use hybridlm_core::train::TrainError;

use crate::checkpoint::CheckpointError;

/// Everything the command line can fail with, split by exit code:
/// bad input or configuration is 2, failures while running are 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {field}: {message}")]
    Config {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Input {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Checkpoint {
        path: PathBuf,
        source: CheckpointError,
    },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Config { .. }
            | Error::Invalid(_)
            | Error::Usage(_)
            | Error::Input { .. }
            | Error::Checkpoint { .. }
            | Error::Planner(_)
            | Error::Datagen(
                DatagenError::NoSeeds
                | DatagenError::EmptyFieldMap(_)
                | DatagenError::NotPretrainText(_),
            ) => 2,
            Error::Train(
                TrainError::InvalidConfig(_)
                | TrainError::BudgetMismatch { .. }
                | TrainError::ModelMismatch
                | TrainError::InvalidRegime(_),
            ) => 2,
            _ => 1,
        }
    }

    pub fn parse(path: &Path, line: usize, message: impl fmt::Display) -> Self {
        Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    pub fn config(path: &Path, field: impl Into<String>, message: impl fmt::Display) -> Self {
        Error::Config {
            path: path.to_path_buf(),
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn input(path: &Path, source: std::io::Error) -> Self {
        Error::Input {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn output(path: &Path, source: std::io::Error) -> Self {
        Error::Output {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
