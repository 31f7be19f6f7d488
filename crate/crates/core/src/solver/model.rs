use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::SolverError;
use crate::config::{HessianCombination, HessianMode};
use crate::types::{ObjectiveSample, OracleSpec};

/// The max-type model `m(d) = max_i (f_i + <g_i, d>) + 1/2 <d, H d>`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSet {
    pub base_values: DVector<f64>,
    pub base_gradients: Vec<DVector<f64>>,
    pub hessian: DMatrix<f64>,
    /// `1 + |H|` with the spectral norm.
    pub beta: f64,
}

impl ModelSet {
    pub fn new(
        base_values: DVector<f64>,
        base_gradients: Vec<DVector<f64>>,
        hessian: DMatrix<f64>,
    ) -> Self {
        let beta = 1.0 + spectral_norm(&hessian);
        Self {
            base_values,
            base_gradients,
            hessian,
            beta,
        }
    }

    /// Linear model without curvature.
    pub fn first_order(base_values: DVector<f64>, base_gradients: Vec<DVector<f64>>) -> Self {
        let n = base_gradients.first().map_or(0, |g| g.len());
        Self {
            base_values,
            base_gradients,
            hessian: DMatrix::zeros(n, n),
            beta: 1.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.hessian.nrows()
    }

    /// `m(0) = max_i f_i`.
    pub fn phi(&self) -> f64 {
        crate::types::scalar_representation(self.base_values.as_slice())
    }

    pub fn evaluate(&self, d: &DVector<f64>) -> f64 {
        evaluate_model(self, d)
    }
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(h: &DMatrix<f64>) -> f64 {
    if h.is_empty() || h.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let sym = (h + h.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(0.0, |m: f64, e| m.max(e.abs()))
}

pub fn evaluate_model(model: &ModelSet, d: &DVector<f64>) -> f64 {
    let linear = model
        .base_values
        .iter()
        .zip(&model.base_gradients)
        .map(|(f, g)| f + g.dot(d))
        .fold(f64::NEG_INFINITY, f64::max);
    linear + 0.5 * d.dot(&(&model.hessian * d))
}

/// Merges per-objective Hessians into one, weighted by `weights` or uniformly.
pub fn combine_hessians(
    hessians: &[DMatrix<f64>],
    combination: HessianCombination,
    weights: &[f64],
) -> DMatrix<f64> {
    let n = hessians.first().map_or(0, |h| h.nrows());
    let q = hessians.len();
    let mut h = DMatrix::zeros(n, n);
    for (i, hi) in hessians.iter().enumerate() {
        let w = match combination {
            HessianCombination::Marginal => weights.get(i).copied().unwrap_or(0.0),
            HessianCombination::Uniform => 1.0 / q as f64,
        };
        if w != 0.0 {
            h += hi * w;
        }
    }
    (&h + h.transpose()) * 0.5
}

/// Model anchored at the sample: `m_i(0) = f~_i`, `grad m_i(0) = g_i`.
/// `weights` are the marginal dual weights, used to combine Hessians.
pub fn build_model(
    spec: &OracleSpec,
    sample: &ObjectiveSample,
    mode: HessianMode,
    combination: HessianCombination,
    weights: &[f64],
) -> Result<ModelSet, SolverError> {
    sample
        .validate(spec)
        .map_err(|e| SolverError::InconsistentSample(e.to_string()))?;
    match mode {
        HessianMode::Zero => Ok(ModelSet::first_order(
            sample.values.clone(),
            sample.gradients.clone(),
        )),
        HessianMode::Subsampled => {
            let hessians = sample.hessians.as_ref().ok_or_else(|| {
                SolverError::InconsistentSample("second-order mode needs Hessians".into())
            })?;
            Ok(ModelSet::new(
                sample.values.clone(),
                sample.gradients.clone(),
                combine_hessians(hessians, combination, weights),
            ))
        }
    }
}
