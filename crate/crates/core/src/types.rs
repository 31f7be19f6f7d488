//! Domain types shared by the solver and the objective backends.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};

use crate::oracles::OracleError;
use crate::rng::RngStream;

/// A point of the decision space: finite coordinates of the problem dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVector(DVector<f64>);

impl DecisionVector {
    pub fn new(coordinates: DVector<f64>) -> Result<Self, OracleError> {
        if coordinates.iter().all(|c| c.is_finite()) {
            Ok(Self(coordinates))
        } else {
            Err(OracleError::NonFinite("decision vector"))
        }
    }

    pub fn from_slice(coordinates: &[f64]) -> Result<Self, OracleError> {
        Self::new(DVector::from_column_slice(coordinates))
    }

    /// Checks the dimension against an oracle's declaration.
    pub fn for_oracle(self, spec: &OracleSpec) -> Result<Self, OracleError> {
        if self.0.len() != spec.dimension {
            return Err(OracleError::DimensionMismatch {
                expected: spec.dimension,
                found: self.0.len(),
            });
        }
        Ok(self)
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for DecisionVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Approximate objective information at one point, plus its provenance.
#[derive(Clone, Debug)]
pub struct ObjectiveSample {
    /// Approximate values `f~_i(x)`.
    pub values: DVector<f64>,
    /// Approximate gradients `g_i(x)`, one per objective.
    pub gradients: Vec<DVector<f64>>,
    /// Per-objective Hessian estimates, when requested and available. The
    /// solver combines them into the single model Hessian.
    pub hessians: Option<Vec<DMatrix<f64>>>,
    /// Trust-region radius the accuracy was targeted at.
    pub delta: f64,
    /// Subsample size per objective; zero for analytic oracles.
    pub sample_sizes: Vec<usize>,
    /// Scalar products spent producing this sample.
    pub cost: u64,
}

impl ObjectiveSample {
    pub fn num_objectives(&self) -> usize {
        self.values.len()
    }

    /// Approximate scalarization `max_i f~_i(x)`.
    pub fn phi(&self) -> f64 {
        scalar_representation(self.values.as_slice())
    }

    /// Checks shapes against `spec` and that every number is finite.
    pub fn validate(&self, spec: &OracleSpec) -> Result<(), OracleError> {
        let (q, n) = (spec.num_objectives, spec.dimension);
        if self.values.len() != q || self.gradients.len() != q || self.sample_sizes.len() != q {
            return Err(OracleError::DimensionMismatch {
                expected: q,
                found: self.values.len(),
            });
        }
        if let Some(g) = self.gradients.iter().find(|g| g.len() != n) {
            return Err(OracleError::DimensionMismatch {
                expected: n,
                found: g.len(),
            });
        }
        if !self.values.iter().all(|v| v.is_finite())
            || !self.gradients.iter().flat_map(|g| g.iter()).all(|v| v.is_finite())
        {
            return Err(OracleError::NonFinite("objective sample"));
        }
        if let Some(hs) = &self.hessians {
            if hs.len() != q {
                return Err(OracleError::DimensionMismatch {
                    expected: q,
                    found: hs.len(),
                });
            }
            for h in hs {
                if h.nrows() != n || h.ncols() != n {
                    return Err(OracleError::DimensionMismatch {
                        expected: n,
                        found: h.nrows(),
                    });
                }
                if !h.iter().all(|v| v.is_finite()) {
                    return Err(OracleError::NonFinite("hessian"));
                }
                let scale = h.amax().max(1.0);
                if (h - h.transpose()).amax() > 1e-12 * scale {
                    return Err(OracleError::AsymmetricHessian);
                }
            }
        }
        Ok(())
    }
}

/// Exact (or full-batch) objective information, used for metrics and archives.
#[derive(Clone, Debug)]
pub struct ExactEvaluation {
    pub values: DVector<f64>,
    pub gradients: Vec<DVector<f64>>,
    pub hessians: Option<Vec<DMatrix<f64>>>,
    /// Scalar products a solver would be charged for this evaluation.
    pub cost: u64,
}

/// Static description of an oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleSpec {
    pub dimension: usize,
    pub num_objectives: usize,
    pub stochastic: bool,
    pub exact_available: bool,
}

/// Accuracy target of one oracle call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRequest {
    /// Trust-region radius `delta_k`.
    pub delta: f64,
    /// Target probability `alpha_k` that the sample is accurate.
    pub alpha: f64,
    pub with_hessians: bool,
}

impl SampleRequest {
    pub fn new(delta: f64, alpha: f64) -> Self {
        Self {
            delta,
            alpha,
            with_hessians: false,
        }
    }

    pub fn with_hessians(mut self, yes: bool) -> Self {
        self.with_hessians = yes;
        self
    }
}

/// A vector objective that can be sampled at a requested accuracy.
///
/// `rngs` holds one stream per objective; implementations draw everything that
/// concerns objective `i` from `rngs[i]` so that per-objective accuracy events
/// are independent.
pub trait Oracle: Send + Sync {
    fn spec(&self) -> OracleSpec;

    /// Approximate values and gradients at `x`. The returned sample's `delta`
    /// equals `request.delta`.
    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError>;

    /// Deterministic exact evaluation, when the oracle supports it.
    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError>;

    /// Number of terms per objective for finite sums; `None` for analytic oracles.
    fn group_sizes(&self) -> Option<Vec<usize>> {
        None
    }

    /// A fixed-size stochastic sample, used by the multi-gradient baseline.
    /// The default asks for unit-radius accuracy.
    fn minibatch(
        &self,
        x: &DVector<f64>,
        _batch: usize,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.evaluate(x, SampleRequest::new(1.0, 0.5), rngs)
    }
}

impl<O: Oracle + ?Sized> Oracle for &O {
    fn spec(&self) -> OracleSpec {
        (**self).spec()
    }

    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        (**self).evaluate(x, request, rngs)
    }

    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        (**self).exact_evaluate(x)
    }

    fn group_sizes(&self) -> Option<Vec<usize>> {
        (**self).group_sizes()
    }

    fn minibatch(
        &self,
        x: &DVector<f64>,
        batch: usize,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        (**self).minibatch(x, batch, rngs)
    }
}

/// `max_i values_i`: the scalarization `phi` on exact values, `phi~` on estimates.
pub fn scalar_representation(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
