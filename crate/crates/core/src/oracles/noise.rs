//! Radius-scaled Gaussian noise on top of an analytic problem.
//!
//! A sample at radius `delta` returns `f_i + eps_i delta^2` and
//! `grad f_i + e_i delta`, with `eps_i ~ N(0, sigma^2)` and
//! `e_i ~ N(0, sigma^2 I)`. The value noise shrinks like `delta^2` and the
//! gradient noise like `delta`, which is the accuracy profile of a fully
//! linear model. With `bounded` set, draws are redrawn until `|eps_i| <= cap_f`
//! and `|e_i| <= cap_g`, so the accuracy bounds hold on every sample.

use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnalyticProblem, OracleError};
use crate::rng::RngStream;
use crate::types::{ExactEvaluation, ObjectiveSample, Oracle, OracleSpec, SampleRequest};

/// Rejection attempts before a bounded draw is pulled radially onto its cap.
const MAX_REJECTIONS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub bounded: bool,
    pub cap_f: f64,
    pub cap_g: f64,
    /// Use a single gradient noise vector for all objectives (drawn from the
    /// first objective's stream) instead of one per objective.
    pub shared_gradient_noise: bool,
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            bounded: false,
            cap_f: 1.0,
            cap_g: 1.0,
            shared_gradient_noise: false,
        }
    }

    pub fn bounded(sigma: f64, cap_f: f64, cap_g: f64) -> Self {
        Self {
            sigma,
            bounded: true,
            cap_f,
            cap_g,
            shared_gradient_noise: false,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(OracleError::InvalidParameter {
                field: "sigma",
                reason: format!("{} is not a nonnegative number", self.sigma),
            });
        }
        if self.bounded {
            for (field, v) in [("cap_f", self.cap_f), ("cap_g", self.cap_g)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(OracleError::InvalidParameter {
                        field,
                        reason: format!("{v} is not positive"),
                    });
                }
            }
        }
        Ok(())
    }

    fn scalar(&self, normal: &Normal<f64>, rng: &mut RngStream) -> f64 {
        let mut eps = normal.sample(rng);
        if self.bounded {
            let mut tries = 1;
            while eps.abs() > self.cap_f {
                if tries >= MAX_REJECTIONS {
                    return eps.signum() * self.cap_f;
                }
                eps = normal.sample(rng);
                tries += 1;
            }
        }
        eps
    }

    fn vector(&self, normal: &Normal<f64>, n: usize, rng: &mut RngStream) -> DVector<f64> {
        let mut draw = || DVector::from_iterator(n, (0..n).map(|_| normal.sample(rng)));
        let mut eps = draw();
        if self.bounded {
            let mut tries = 1;
            while eps.norm() > self.cap_g {
                if tries >= MAX_REJECTIONS {
                    let norm = eps.norm();
                    return eps * (self.cap_g / norm);
                }
                eps = draw();
                tries += 1;
            }
        }
        eps
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NoisyProblem {
    pub problem: AnalyticProblem,
    pub noise: NoiseSpec,
}

impl NoisyProblem {
    pub fn new(problem: AnalyticProblem, noise: NoiseSpec) -> Result<Self, OracleError> {
        noise.validate()?;
        Ok(Self { problem, noise })
    }

    /// Exact evaluation plus radius-scaled noise drawn from `rngs`.
    pub fn noisy_evaluate(
        &self,
        x: &DVector<f64>,
        delta: f64,
        with_hessians: bool,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        let exact = self.problem.exact(x)?;
        let q = exact.values.len();
        let n = x.len();
        if rngs.len() < q {
            return Err(OracleError::DimensionMismatch {
                expected: q,
                found: rngs.len(),
            });
        }
        let mut values = exact.values;
        let mut gradients = exact.gradients;
        if self.noise.sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise.sigma).map_err(|e| {
                OracleError::InvalidParameter {
                    field: "sigma",
                    reason: e.to_string(),
                }
            })?;
            let d2 = delta * delta;
            let mut shared = None;
            for i in 0..q {
                values[i] += self.noise.scalar(&normal, &mut rngs[i]) * d2;
                let e = if self.noise.shared_gradient_noise {
                    shared
                        .get_or_insert_with(|| self.noise.vector(&normal, n, &mut rngs[0]))
                        .clone()
                } else {
                    self.noise.vector(&normal, n, &mut rngs[i])
                };
                gradients[i].axpy(delta, &e, 1.0);
            }
        }
        Ok(ObjectiveSample {
            values,
            gradients,
            hessians: exact.hessians.filter(|_| with_hessians),
            delta,
            sample_sizes: vec![0; q],
            cost: 0,
        })
    }
}

impl Oracle for NoisyProblem {
    fn spec(&self) -> OracleSpec {
        OracleSpec {
            stochastic: self.noise.sigma > 0.0,
            ..self.problem.spec()
        }
    }

    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.noisy_evaluate(x, request.delta, request.with_hessians, rngs)
    }

    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        self.problem.exact(x)
    }
}
