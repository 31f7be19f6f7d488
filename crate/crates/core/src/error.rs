use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::marginal::MarginalError;
use crate::oracles::dataset::DatasetError;
use crate::oracles::OracleError;
use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-level error wrapping the per-module failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Output { path: PathBuf, message: String },
}

impl Error {
    /// True for errors caused by the user's configuration rather than by a run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Dataset(_))
    }
}
