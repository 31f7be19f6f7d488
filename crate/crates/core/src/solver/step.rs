use nalgebra::DVector;

use super::model::ModelSet;
use super::SolverError;
use crate::config::StepRule;
use crate::marginal::MarginalSolution;

/// A step inside the trust region and the model decrease it achieves.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyStep {
    pub step: DVector<f64>,
    /// Step length along the marginal direction before any refinement.
    pub alpha: f64,
    /// `m(0) - m(step)`.
    pub predicted_reduction: f64,
}

/// Minimizer of `m(alpha d)` over `alpha in [0, delta]`.
///
/// Along `d` the model is `max_i (f_i + alpha s_i) + c alpha^2 / 2` with
/// `s_i = <g_i, d>` and `c = <d, H d>`, so the minimum sits at an end point,
/// at a crossing of two linear pieces, or at the vertex of one piece.
fn exact_alpha(model: &ModelSet, d: &DVector<f64>, delta: f64) -> f64 {
    let f = &model.base_values;
    let s: Vec<f64> = model.base_gradients.iter().map(|g| g.dot(d)).collect();
    let c = d.dot(&(&model.hessian * d));
    let along = |a: f64| {
        f.iter()
            .zip(&s)
            .map(|(fi, si)| fi + a * si)
            .fold(f64::NEG_INFINITY, f64::max)
            + 0.5 * c * a * a
    };
    let mut candidates = vec![0.0, delta];
    for i in 0..s.len() {
        if c > 0.0 {
            candidates.push(-s[i] / c);
        }
        for j in i + 1..s.len() {
            if s[i] != s[j] {
                candidates.push((f[j] - f[i]) / (s[i] - s[j]));
            }
        }
    }
    let mut best = (0.0, along(0.0));
    for a in candidates {
        if a.is_finite() && a > 0.0 && a <= delta {
            let m = along(a);
            if m < best.1 {
                best = (a, m);
            }
        }
    }
    best.0
}

/// Projected subgradient moves inside the ball; each is kept only if it
/// lowers the model.
fn refine(model: &ModelSet, mut d: DVector<f64>, delta: f64, steps: usize) -> DVector<f64> {
    let mut current = model.evaluate(&d);
    for _ in 0..steps {
        let active = model
            .base_values
            .iter()
            .zip(&model.base_gradients)
            .map(|(f, g)| f + g.dot(&d))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        let sub = &model.base_gradients[active.0] + &model.hessian * &d;
        let norm = sub.norm();
        if norm == 0.0 {
            break;
        }
        let mut improved = false;
        let mut t = delta / norm;
        for _ in 0..20 {
            let mut trial = &d - &sub * t;
            let tn = trial.norm();
            if tn > delta {
                trial *= delta / tn;
            }
            let m = model.evaluate(&trial);
            if m < current {
                d = trial;
                current = m;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    d
}

/// Step along the marginal direction satisfying
/// `m(0) - m(step) >= omega/2 * min(delta, omega / beta)`.
pub fn cauchy_step(
    model: &ModelSet,
    marginal: &MarginalSolution,
    delta: f64,
    rule: StepRule,
    refine_steps: usize,
) -> Result<CauchyStep, SolverError> {
    if !(marginal.omega > 0.0) || marginal.direction.iter().all(|v| *v == 0.0) {
        return Err(SolverError::DegenerateDirection);
    }
    let d = &marginal.direction;
    let alpha = match rule {
        StepRule::Bound => delta.min(marginal.omega / model.beta),
        StepRule::Exact => exact_alpha(model, d, delta),
    };
    let mut step = d * alpha;
    if refine_steps > 0 {
        step = refine(model, step, delta, refine_steps);
    }
    let predicted_reduction = model.phi() - model.evaluate(&step);
    Ok(CauchyStep {
        step,
        alpha,
        predicted_reduction,
    })
}

/// `(phi(x) - phi(x + d)) / predicted`, or `-inf` when the predicted
/// reduction is below `guard * max(1, |phi(x)|)`.
pub fn compute_rho(phi_at_x: f64, phi_at_trial: f64, predicted_reduction: f64, guard: f64) -> f64 {
    if !(predicted_reduction > guard * phi_at_x.abs().max(1.0)) || !phi_at_trial.is_finite() {
        return f64::NEG_INFINITY;
    }
    (phi_at_x - phi_at_trial) / predicted_reduction
}
