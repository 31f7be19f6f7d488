//! Objective backends.

pub mod analytic;
pub mod dataset;
pub mod finite_sum;
pub mod noise;
pub mod sampling;

use nalgebra::DVector;
use thiserror::Error;

use crate::rng::RngStream;
use crate::types::{ExactEvaluation, ObjectiveSample, Oracle, OracleSpec, SampleRequest};

pub use analytic::{test1_front_distance, AnalyticProblem};
pub use finite_sum::{FiniteSumProblem, SampleSizeRule};
pub use noise::{NoiseSpec, NoisyProblem};
pub use sampling::{required_sample_size, SampleKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} contains NaN or infinite values")]
    NonFinite(&'static str),
    #[error("hessian is not symmetric")]
    AsymmetricHessian,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("exact evaluation is not available for this oracle")]
    ExactUnavailable,
    #[error("invalid oracle parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

/// Deterministic full-accuracy view of an oracle: every call is an exact (or
/// full-batch) evaluation charged at its full cost. This is the deterministic
/// trust-region baseline's oracle.
#[derive(Clone, Copy, Debug)]
pub struct FullBatch<O>(pub O);

impl<O: Oracle> Oracle for FullBatch<O> {
    fn spec(&self) -> OracleSpec {
        OracleSpec {
            stochastic: false,
            ..self.0.spec()
        }
    }

    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        _rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        let exact = self.0.exact_evaluate(x)?;
        let q = exact.values.len();
        let sizes = self.0.group_sizes().unwrap_or_else(|| vec![0; q]);
        Ok(ObjectiveSample {
            values: exact.values,
            gradients: exact.gradients,
            hessians: if request.with_hessians { exact.hessians } else { None },
            delta: request.delta,
            sample_sizes: sizes,
            cost: exact.cost,
        })
    }

    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        self.0.exact_evaluate(x)
    }

    fn group_sizes(&self) -> Option<Vec<usize>> {
        self.0.group_sizes()
    }

    fn minibatch(
        &self,
        x: &DVector<f64>,
        _batch: usize,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.evaluate(x, SampleRequest::new(1.0, 1.0), rngs)
    }
}
