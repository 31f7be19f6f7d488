//! Regularized logistic regression split into per-group objectives.
//!
//! Objective `i` is the mean logistic loss over the rows of group `i` plus
//! `lambda_i / 2 * |x^|^2`, where `x^` is `x` with the intercept coordinate
//! zeroed. Samples are drawn by uniform subsampling without replacement, with
//! sizes set by [`required_sample_size`](super::required_sample_size).

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sampling::{required_sample_size, SampleKind};
use super::OracleError;
use crate::rng::RngStream;
use crate::types::{ExactEvaluation, ObjectiveSample, Oracle, OracleSpec, SampleRequest};

/// How the bound constants in the sample-size law are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SampleSizeRule {
    /// Fixed `(value, gradient)` bound per group.
    Estimated(Vec<(f64, f64)>),
    /// Bounds recomputed at each point from the data and the iterate; they
    /// grow like `exp(|x|)`.
    Analytic,
}

#[derive(Clone, Debug)]
pub struct FiniteSumProblem {
    features: DMatrix<f64>,
    labels: DVector<f64>,
    groups: Vec<Vec<usize>>,
    regularizers: Vec<f64>,
    intercept_column: Option<usize>,
    rule: SampleSizeRule,
    max_row_norm: Vec<f64>,
}

/// Loss, gradient and optional Hessian of one group on a set of rows.
#[derive(Clone, Debug)]
pub struct GroupLoss {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: Option<DMatrix<f64>>,
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl FiniteSumProblem {
    /// `group_index[j]` is the 0-based group of row `j`; there are
    /// `regularizers.len()` groups.
    pub fn new(
        features: DMatrix<f64>,
        labels: DVector<f64>,
        group_index: &[usize],
        regularizers: Vec<f64>,
        intercept_column: Option<usize>,
    ) -> Result<Self, OracleError> {
        let (rows, cols) = features.shape();
        let q = regularizers.len();
        if q == 0 {
            return Err(OracleError::InvalidParameter {
                field: "regularizers",
                reason: "at least one group is required".into(),
            });
        }
        if labels.len() != rows || group_index.len() != rows {
            return Err(OracleError::DimensionMismatch {
                expected: rows,
                found: labels.len().min(group_index.len()),
            });
        }
        if cols == 0 {
            return Err(OracleError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFinite("features"));
        }
        if let Some(y) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
            return Err(OracleError::InvalidParameter {
                field: "labels",
                reason: format!("label {y} is not -1 or +1"),
            });
        }
        if let Some(l) = regularizers.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(OracleError::InvalidParameter {
                field: "regularizers",
                reason: format!("{l} is not a nonnegative number"),
            });
        }
        if let Some(c) = intercept_column.filter(|c| *c >= cols) {
            return Err(OracleError::InvalidParameter {
                field: "intercept_column",
                reason: format!("column {c} is out of range for {cols} columns"),
            });
        }
        let mut groups = vec![Vec::new(); q];
        for (j, &g) in group_index.iter().enumerate() {
            if g >= q {
                return Err(OracleError::InvalidParameter {
                    field: "group_index",
                    reason: format!("row {j} has group {g} but there are {q} groups"),
                });
            }
            groups[g].push(j);
        }
        if let Some(i) = groups.iter().position(|g| g.is_empty()) {
            return Err(OracleError::EmptyGroup(i));
        }
        let max_row_norm = groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|&j| features.row(j).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        Ok(Self {
            features,
            labels,
            groups,
            rule: SampleSizeRule::Estimated(vec![(1.0, 1.0); q]),
            regularizers,
            intercept_column,
            max_row_norm,
        })
    }

    pub fn with_rule(mut self, rule: SampleSizeRule) -> Result<Self, OracleError> {
        if let SampleSizeRule::Estimated(b) = &rule {
            if b.len() != self.groups.len() {
                return Err(OracleError::DimensionMismatch {
                    expected: self.groups.len(),
                    found: b.len(),
                });
            }
            if b.iter().any(|(f, g)| !(*f > 0.0 && *g > 0.0 && f.is_finite() && g.is_finite())) {
                return Err(OracleError::InvalidParameter {
                    field: "bound_constants",
                    reason: "bounds must be positive".into(),
                });
            }
        }
        self.rule = rule;
        Ok(self)
    }

    /// Synthetic two-group data set: `rows` rows with `dim` standard normal
    /// features plus an intercept column. The first 60% of rows form group 0;
    /// the rest have features shifted by 0.5 and labels drawn from a perturbed
    /// weight vector.
    pub fn synthetic(rows: usize, dim: usize, regularizer: f64, seed: u64) -> Result<Self, OracleError> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let w0: Vec<f64> = (0..=dim).map(|_| normal()).collect();
        let w1: Vec<f64> = w0.iter().map(|w| w + 0.7 * normal()).collect();
        let split = (rows * 3).div_ceil(5);
        let mut features = DMatrix::zeros(rows, dim + 1);
        let mut labels = DVector::zeros(rows);
        let mut group_index = vec![0; rows];
        for j in 0..rows {
            let group = usize::from(j >= split);
            let shift = 0.5 * group as f64;
            for c in 0..dim {
                features[(j, c)] = normal() + shift;
            }
            features[(j, dim)] = 1.0;
            let w = if group == 0 { &w0 } else { &w1 };
            let z: f64 = (0..=dim).map(|c| features[(j, c)] * w[c]).sum();
            let u = 0.5 * (1.0 + (normal() / 2.0).tanh());
            labels[j] = if sigmoid(z) > u { 1.0 } else { -1.0 };
            group_index[j] = group;
        }
        Self::new(features, labels, &group_index, vec![regularizer; 2], Some(dim))
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    /// Row indices of each group.
    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn regularizers(&self) -> &[f64] {
        &self.regularizers
    }

    pub fn intercept_column(&self) -> Option<usize> {
        self.intercept_column
    }

    pub fn rule(&self) -> &SampleSizeRule {
        &self.rule
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    fn check_dimension(&self, x: &DVector<f64>) -> Result<(), OracleError> {
        if x.len() != self.dimension() {
            return Err(OracleError::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(OracleError::NonFinite("decision vector"));
        }
        Ok(())
    }

    fn masked(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut xh = x.clone();
        if let Some(c) = self.intercept_column {
            xh[c] = 0.0;
        }
        xh
    }

    /// Objective `group` evaluated on the given rows only.
    pub fn group_loss(
        &self,
        group: usize,
        rows: &[usize],
        x: &DVector<f64>,
        with_hessian: bool,
    ) -> GroupLoss {
        let n = self.dimension();
        let lambda = self.regularizers[group];
        let m = rows.len().max(1) as f64;
        let mut value = 0.0;
        let mut gradient = DVector::zeros(n);
        let mut hessian = with_hessian.then(|| DMatrix::zeros(n, n));
        for &j in rows {
            let a = self.features.row(j).transpose();
            let y = self.labels[j];
            let z = y * a.dot(x);
            value += softplus(-z);
            let s = sigmoid(-z);
            gradient.axpy(-y * s / m, &a, 1.0);
            if let Some(h) = hessian.as_mut() {
                h.ger(s * (1.0 - s) / m, &a, &a, 1.0);
            }
        }
        let xh = self.masked(x);
        value = value / m + 0.5 * lambda * xh.norm_squared();
        gradient.axpy(lambda, &xh, 1.0);
        if let Some(h) = hessian.as_mut() {
            for c in 0..n {
                if Some(c) != self.intercept_column {
                    h[(c, c)] += lambda;
                }
            }
        }
        GroupLoss {
            value,
            gradient,
            hessian,
        }
    }

    fn assemble(
        &self,
        x: &DVector<f64>,
        subsets: &[Vec<usize>],
        with_hessians: bool,
        delta: f64,
    ) -> ObjectiveSample {
        let q = self.groups.len();
        let mut values = DVector::zeros(q);
        let mut gradients = Vec::with_capacity(q);
        let mut hessians = Vec::with_capacity(q);
        for (i, rows) in subsets.iter().enumerate() {
            let loss = self.group_loss(i, rows, x, with_hessians);
            values[i] = loss.value;
            gradients.push(loss.gradient);
            if let Some(h) = loss.hessian {
                hessians.push(h);
            }
        }
        let sample_sizes: Vec<usize> = subsets.iter().map(Vec::len).collect();
        ObjectiveSample {
            values,
            gradients,
            hessians: with_hessians.then_some(hessians),
            delta,
            cost: sample_sizes.iter().sum::<usize>() as u64,
            sample_sizes,
        }
    }

    /// `(F_i, G_i)` with `F_i = e^|x| max|a_j| + ln 2 + lambda_i/2 |x|^2` and
    /// `G_i = max|a_j| + lambda_i |x|`, the maximum taken over group `i`.
    pub fn analytic_bound_constants(&self, x: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let r = x.norm();
        let f = self
            .max_row_norm
            .iter()
            .zip(&self.regularizers)
            .map(|(a, l)| r.exp() * a + std::f64::consts::LN_2 + 0.5 * l * r * r)
            .collect();
        let g = self
            .max_row_norm
            .iter()
            .zip(&self.regularizers)
            .map(|(a, l)| a + l * r)
            .collect();
        (f, g)
    }

    /// Subsample size per group for the requested accuracy.
    pub fn sample_sizes(&self, x: &DVector<f64>, delta: f64, alpha: f64) -> Vec<usize> {
        let bounds: Vec<(f64, f64)> = match &self.rule {
            SampleSizeRule::Estimated(b) => b.clone(),
            SampleSizeRule::Analytic => {
                let (f, g) = self.analytic_bound_constants(x);
                f.into_iter().zip(g).collect()
            }
        };
        self.groups
            .iter()
            .zip(bounds)
            .map(|(g, (bf, bg))| {
                let nv = required_sample_size(SampleKind::Value, bf, delta, alpha, g.len());
                let ng = required_sample_size(SampleKind::Gradient, bg, delta, alpha, g.len());
                nv.max(ng)
            })
            .collect()
    }

    fn draw_subsets(&self, sizes: &[usize], rngs: &mut [RngStream]) -> Vec<Vec<usize>> {
        self.groups
            .iter()
            .zip(sizes)
            .zip(rngs.iter_mut())
            .map(|((group, &m), rng)| {
                if m >= group.len() {
                    group.clone()
                } else {
                    let mut picks = index::sample(rng, group.len(), m).into_vec();
                    picks.sort_unstable();
                    picks.into_iter().map(|p| group[p]).collect()
                }
            })
            .collect()
    }

    fn check_rngs(&self, rngs: &[RngStream]) -> Result<(), OracleError> {
        if rngs.len() < self.groups.len() {
            return Err(OracleError::DimensionMismatch {
                expected: self.groups.len(),
                found: rngs.len(),
            });
        }
        Ok(())
    }

    /// Adaptive subsample at accuracy `(delta, alpha)`; Hessians use the same rows.
    pub fn subsampled_evaluate(
        &self,
        x: &DVector<f64>,
        delta: f64,
        alpha: f64,
        with_hessians: bool,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.check_dimension(x)?;
        self.check_rngs(rngs)?;
        if !(delta > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
            return Err(OracleError::InvalidParameter {
                field: "request",
                reason: format!("delta {delta} must be positive and alpha {alpha} in (0, 1)"),
            });
        }
        let sizes = self.sample_sizes(x, delta, alpha);
        let subsets = self.draw_subsets(&sizes, rngs);
        Ok(self.assemble(x, &subsets, with_hessians, delta))
    }
}

impl Oracle for FiniteSumProblem {
    fn spec(&self) -> OracleSpec {
        OracleSpec {
            dimension: self.dimension(),
            num_objectives: self.groups.len(),
            stochastic: true,
            exact_available: true,
        }
    }

    fn evaluate(
        &self,
        x: &DVector<f64>,
        request: SampleRequest,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.subsampled_evaluate(x, request.delta, request.alpha, request.with_hessians, rngs)
    }

    fn exact_evaluate(&self, x: &DVector<f64>) -> Result<ExactEvaluation, OracleError> {
        self.check_dimension(x)?;
        let s = self.assemble(x, &self.groups, true, 1.0);
        Ok(ExactEvaluation {
            values: s.values,
            gradients: s.gradients,
            hessians: s.hessians,
            cost: s.cost,
        })
    }

    fn group_sizes(&self) -> Option<Vec<usize>> {
        Some(self.groups.iter().map(Vec::len).collect())
    }

    fn minibatch(
        &self,
        x: &DVector<f64>,
        batch: usize,
        rngs: &mut [RngStream],
    ) -> Result<ObjectiveSample, OracleError> {
        self.check_dimension(x)?;
        self.check_rngs(rngs)?;
        let sizes = vec![batch.max(1); self.groups.len()];
        let subsets = self.draw_subsets(&sizes, rngs);
        Ok(self.assemble(x, &subsets, false, 1.0))
    }
}
