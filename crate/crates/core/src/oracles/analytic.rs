//! Two-objective analytic test problems in the plane.
//!
//! - `Test1`: `f_1 = x_1^2 + x_2^2`, `f_2 = (x_1 - 5)^2 + (x_2 - 5)^2` (convex front;
//!   the Pareto set is the segment `{(t, t) : t in [0, 5]}`).
//! - `Test2`: `f_1 = sin x_2`, `f_2 = 1 - exp(-(x_1 - 1/2)^2 - (x_2 - 1/2)^2)` (nonconvex front).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::rng::RngStream;
use crate::types::{ExactEvaluation, ObjectiveSample, Oracle, OracleSpec, SampleRequest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticProblem {
    Test1,
    Test2,
}

impl AnalyticProblem {
    pub const DIMENSION: usize = 2;
    pub const NUM_OBJECTIVES: usize = 2;

    /// Exact values, gradients and Hessians.
    pub fn exact(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        if x.len() != Self::DIMENSION {
            return Err(OracleError::DimensionMismatch {
                expected: Self::DIMENSION,
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFinite("decision vector"));
        }
        let (x1, x2) = (x[0], x[1]);
        let (values, gradients, hessians) = match self {
            AnalyticProblem::Test1 => {
                let f1 = x1 * x1 + x2 * x2;
                let f2 = (x1 - 5.0).powi(2) + (x2 - 5.0).powi(2);
                let g1 = DVector::from_vec(vec![2.0 * x1, 2.0 * x2]);
                let g2 = DVector::from_vec(vec![2.0 * (x1 - 5.0), 2.0 * (x2 - 5.0)]);
                let h = DMatrix::identity(2, 2) * 2.0;
                (vec![f1, f2], vec![g1, g2], vec![h.clone(), h])
            }
            AnalyticProblem::Test2 => {
                let (u1, u2) = (x1 - 0.5, x2 - 0.5);
                let e = (-(u1 * u1) - u2 * u2).exp();
                let f1 = x2.sin();
                let f2 = 1.0 - e;
                let g1 = DVector::from_vec(vec![0.0, x2.cos()]);
                let g2 = DVector::from_vec(vec![2.0 * e * u1, 2.0 * e * u2]);
                let h1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -x2.sin()]);
                let h2 = DMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        2.0 * e * (1.0 - 2.0 * u1 * u1),
                        -4.0 * e * u1 * u2,
                        -4.0 * e * u1 * u2,
                        2.0 * e * (1.0 - 2.0 * u2 * u2),
                    ],
                );
                (vec![f1, f2], vec![g1, g2], vec![h1, h2])
            }
        };
        Ok(ExactEvaluation {
            values: DVector::from_vec(values),
            gradients,
            hessians: Some(hessians),
            cost: 0,
        })
    }
}

impl fmt::Display for AnalyticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnalyticProblem::Test1 => "test1",
            AnalyticProblem::Test2 => "test2",
        })
    }
}

impl FromStr for AnalyticProblem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "test1" => Ok(AnalyticProblem::Test1),
            "test2" => Ok(AnalyticProblem::Test2),
            other => Err(format!("unknown analytic problem `{other}`")),
        }
    }
}

/// Noise-free oracle: every sample is the exact evaluation.
impl Oracle for AnalyticProblem {
    fn spec(&self) -> OracleSpec {
        OracleSpec {
            dimension: Self::DIMENSION,
            num_objectives: Self::NUM_OBJECTIVES,
            stochastic: false,
            exact_available: true,
        }
    }

    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        _rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        let exact = self.exact(x)?;
        Ok(ObjectiveSample {
            values: exact.values,
            gradients: exact.gradients,
            hessians: exact.hessians.filter(|_| request.with_hessians),
            delta: request.delta,
            sample_sizes: vec![0; Self::NUM_OBJECTIVES],
            cost: 0,
        })
    }

    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        self.exact(x)
    }
}

/// Euclidean distance from an objective vector to the Pareto front of Test 1,
/// the curve `(2t^2, 2(5 - t)^2)` for `t in [0, 5]`.
pub fn test1_front_distance(f: &[f64]) -> f64 {
    let dist = |t: f64| (f[0] - 2.0 * t * t).hypot(f[1] - 2.0 * (5.0 - t).powi(2));
    let steps = 5000;
    let h = 5.0 / steps as f64;
    let best = (0..=steps)
        .map(|k| k as f64 * h)
        .min_by(|a, b| dist(*a).total_cmp(&dist(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = ((best - h).max(0.0), (best + h).min(5.0));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let a = hi - r * (hi - lo);
        let b = lo + r * (hi - lo);
        if dist(a) <= dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    dist(0.5 * (lo + hi)).min(dist(best))
}
