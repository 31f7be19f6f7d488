//! Simplified stochastic multi-gradient baseline.
//!
//! Each step solves the marginal subproblem on minibatch gradients and moves
//! against the resulting common direction `sum_i lambda_i g_i` with step
//! `t0 / sqrt(k + 1)`. This is a plain stand-in for comparison curves, not a
//! full multi-gradient method.

use nalgebra::DVector;

use crate::config::SolverConfig;
use crate::marginal::{solve_marginal, MarginalError};
use crate::rng::RngStream;
use crate::solver::{IterationRecord, SolverError};
use crate::types::{scalar_representation, DecisionVector, Oracle};

/// `x - step * sum_i lambda_i g_i` with `lambda` from the marginal subproblem.
pub fn smg_baseline_step(
    x: &DVector<f64>,
    gradients: &[DVector<f64>],
    step_size: f64,
) -> Result<DVector<f64>, MarginalError> {
    let sol = match solve_marginal(gradients, 1e-10) {
        Ok(s) => s,
        Err(MarginalError::ToleranceNotReached { best }) => best,
        Err(e) => return Err(e),
    };
    let mut v = DVector::zeros(x.len());
    for (w, g) in sol.weights.iter().zip(gradients) {
        v.axpy(*w, g, 1.0);
    }
    Ok(x - v * step_size)
}

pub fn smg_step_size(step0: f64, k: usize) -> f64 {
    step0 / ((k + 1) as f64).sqrt()
}

/// Runs `config.k_max` baseline steps. Records use `delta` for the step size;
/// `rho` is NaN and every step counts as a success.
pub fn run_smg<O: Oracle + ?Sized>(
    oracle: &O,
    config: &SolverConfig,
    x0: DecisionVector,
    step0: f64,
    batch: usize,
) -> Result<(Vec<IterationRecord>, DVector<f64>, u64), SolverError> {
    let spec = oracle.spec();
    let mut x = x0.for_oracle(&spec)?.into_inner();
    let mut rngs = RngStream::per_objective(config.seed, spec.num_objectives);
    let mut cost = 0;
    let mut records = Vec::with_capacity(config.k_max);
    for k in 0..config.k_max {
        let sample = oracle.minibatch(&x, batch, &mut rngs)?;
        sample
            .validate(&spec)
            .map_err(|e| SolverError::InconsistentSample(e.to_string()))?;
        cost += sample.cost;
        let (omega_true, phi_true) = if config.exact_metrics && spec.exact_available {
            let e = oracle.exact_evaluate(&x)?;
            let w = match solve_marginal(&e.gradients, config.marginal_tol) {
                Ok(s) => s.omega,
                Err(MarginalError::ToleranceNotReached { best }) => best.omega,
                Err(e) => return Err(e.into()),
            };
            (Some(w), Some(scalar_representation(e.values.as_slice())))
        } else {
            (None, None)
        };
        let t = smg_step_size(step0, k);
        let next = smg_baseline_step(&x, &sample.gradients, t)?;
        let omega_m = match solve_marginal(&sample.gradients, config.marginal_tol) {
            Ok(s) => s.omega,
            Err(MarginalError::ToleranceNotReached { best }) => best.omega,
            Err(e) => return Err(e.into()),
        };
        records.push(IterationRecord {
            k,
            omega_m,
            omega_true,
            phi_tilde: sample.phi(),
            phi_true,
            rho: f64::NAN,
            delta: t,
            success: true,
            step_norm: (&next - &x).norm(),
            predicted_reduction: 0.0,
            beta: 1.0,
            cost_so_far: cost,
            sample_sizes: sample.sample_sizes.clone(),
        });
        x = next;
    }
    Ok((records, x, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{AnalyticProblem, FiniteSumProblem};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn single_objective_is_gradient_descent() {
        let x = v(&[1.0, 1.0]);
        let next = smg_baseline_step(&x, &[v(&[2.0, -4.0])], 0.25).unwrap();
        assert_eq!(next, v(&[0.5, 2.0]));
    }

    #[test]
    fn opposing_gradients_do_not_move() {
        let x = v(&[1.0, 1.0]);
        let next = smg_baseline_step(&x, &[v(&[3.0, 4.0]), v(&[-3.0, -4.0])], 1.0).unwrap();
        assert!((next - x).norm() < 1e-15);
    }

    #[test]
    fn balanced_step() {
        let x = v(&[1.0, 1.0]);
        let next = smg_baseline_step(&x, &[v(&[2.0, 0.0]), v(&[0.0, 2.0])], 0.5).unwrap();
        assert!((next - v(&[0.5, 0.5])).norm() < 1e-12);
    }

    #[test]
    fn step_schedule() {
        assert_eq!(smg_step_size(1.0, 0), 1.0);
        assert_eq!(smg_step_size(1.0, 3), 0.5);
    }

    #[test]
    fn minibatch_cost_is_counted() {
        let p = FiniteSumProblem::synthetic(100, 3, 0.1, 2).unwrap();
        let cfg = SolverConfig { k_max: 5, ..SolverConfig::default() };
        let (records, _, cost) = run_smg(&p, &cfg, DecisionVector::new(DVector::zeros(4)).unwrap(), 0.5, 10).unwrap();
        assert_eq!(cost, 5 * 20);
        assert_eq!(records.last().unwrap().cost_so_far, 100);
        let (r, _, _) = run_smg(&AnalyticProblem::Test1, &cfg, DecisionVector::from_slice(&[9.0, 9.0]).unwrap(), 0.1, 1).unwrap();
        assert!(r.last().unwrap().phi_true.unwrap() < r[0].phi_true.unwrap());
    }
}
