//! Stochastic multi-objective trust-region optimization.
//!
//! The crate minimizes a vector of objectives `(f_1, ..., f_q)` when only
//! noisy or subsampled estimates of the values and gradients are available.
//! Each iteration builds a max-type model of the objectives, solves the
//! marginal subproblem for a common descent direction, takes a Cauchy step
//! inside the trust region and accepts or rejects it with the usual
//! actual-over-predicted reduction test. Model accuracy is tied to the
//! trust-region radius: noise is scaled with the radius for the analytic test
//! problems, and subsample sizes grow as the radius shrinks for finite-sum
//! objectives.
//!
//! Module map:
//!
//! - [`config`]: solver parameters, the probability schedule, the flat config format.
//! - [`types`]: decision vectors, objective samples and the [`Oracle`] contract.
//! - [`rng`]: seeded per-objective random streams.
//! - [`marginal`]: the min-max direction subproblem and its min-norm-point dual.
//! - [`solver`]: models, Cauchy steps and the trust-region loop.
//! - [`oracles`]: analytic problems, radius-scaled noise, subsampled logistic regression.
//! - [`pareto`]: non-dominated archives and the front exploration procedure.
//! - [`harness`]: experiment specs, multi-seed runs, baselines and result files.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod config;
pub mod error;
pub mod harness;
pub mod marginal;
pub mod oracles;
pub mod pareto;
pub mod rng;
pub mod solver;
pub mod types;

pub use config::{alpha_at, AlphaSchedule, HessianCombination, HessianMode, SolverConfig, StepRule};
pub use error::{Error, Result};
pub use marginal::{solve_marginal, MarginalSolution};
pub use rng::RngStream;
pub use solver::{run, IterationRecord, ModelSet, RunOutput, TrustRegionState};
pub use types::{
    scalar_representation, DecisionVector, ExactEvaluation, ObjectiveSample, Oracle, OracleSpec,
    SampleRequest,
};
