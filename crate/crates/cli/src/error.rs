use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the command-line pipeline, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Schema(_) => 3,
            CliError::Convergence(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// A CSV failure while reading `path`: I/O problems keep their code,
    /// everything else is a schema violation.
    pub fn csv(path: &Path, err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(source) => CliError::io(path, source),
                _ => unreachable!("is_io_error implies an Io kind"),
            }
        } else {
            CliError::schema(format!("{}: {err}", path.display()))
        }
    }

    pub fn json(path: &Path, err: serde_json::Error) -> Self {
        if err.is_io() {
            CliError::io(path, std::io::Error::other(err))
        } else {
            CliError::schema(format!("{}: {err}", path.display()))
        }
    }
}

impl From<quantlet_core::Error> for CliError {
    fn from(err: quantlet_core::Error) -> Self {
        use quantlet_core::Error as E;
        match err {
            E::Config(_) | E::Precondition(_) => CliError::Config(err.to_string()),
            E::Convergence { .. } => CliError::Convergence(err.to_string()),
            _ => CliError::Schema(err.to_string()),
        }
    }
}
