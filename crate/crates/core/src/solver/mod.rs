//! The stochastic multi-objective trust-region loop.
//!
//! Each iteration samples the objectives at the accuracy tied to the current
//! radius, solves the marginal subproblem on the sampled gradients, takes a
//! Cauchy step on the max-type model, re-samples at the trial point and
//! applies the two-part acceptance test `rho >= eta1` and
//! `omega_m > theta * delta`.

mod driver;
mod model;
mod step;

use thiserror::Error;

use crate::config::ConfigError;
use crate::marginal::MarginalError;
use crate::oracles::OracleError;

pub use driver::{
    run, run_with_sink, smop_iterate, IterationRecord, RecordSink, RunOutput, TrustRegionState,
};
pub use model::{build_model, combine_hessians, evaluate_model, spectral_norm, ModelSet};
pub use step::{cauchy_step, compute_rho, CauchyStep};

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("marginal is zero, the point is critical for the model")]
    DegenerateDirection,
    #[error("sample does not match the oracle: {0}")]
    InconsistentSample(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Marginal(#[from] MarginalError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
