use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::build_model;
use super::step::{cauchy_step, compute_rho};
use super::SolverError;
use crate::config::{alpha_at, HessianMode, SolverConfig};
use crate::marginal::{solve_marginal, MarginalError, MarginalSolution};
use crate::rng::RngStream;
use crate::types::{scalar_representation, DecisionVector, Oracle, SampleRequest};

/// One iteration of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Marginal of the sampled gradients at `x_k`.
    pub omega_m: f64,
    /// Marginal of the exact gradients at `x_k`.
    pub omega_true: Option<f64>,
    pub phi_tilde: f64,
    pub phi_true: Option<f64>,
    /// `-inf` when no trial point was evaluated or the predicted reduction vanished.
    pub rho: f64,
    /// Radius used at this iteration.
    pub delta: f64,
    pub success: bool,
    pub step_norm: f64,
    pub predicted_reduction: f64,
    pub beta: f64,
    /// Scalar products spent up to and including this iteration.
    pub cost_so_far: u64,
    pub sample_sizes: Vec<usize>,
}

/// Receives records as they are produced.
pub trait RecordSink {
    fn record(&mut self, record: &IterationRecord);
}

impl RecordSink for Vec<IterationRecord> {
    fn record(&mut self, record: &IterationRecord) {
        self.push(record.clone());
    }
}

impl<F: FnMut(&IterationRecord)> RecordSink for F {
    fn record(&mut self, record: &IterationRecord) {
        self(record)
    }
}

#[derive(Clone, Debug)]
pub struct TrustRegionState {
    pub k: usize,
    pub x: DVector<f64>,
    pub delta: f64,
    pub cumulative_cost: u64,
    /// One stream per objective.
    pub rngs: Vec<RngStream>,
    pub history: Vec<IterationRecord>,
}

impl TrustRegionState {
    pub fn new(x0: DecisionVector, config: &SolverConfig, num_objectives: usize) -> Self {
        Self {
            k: 0,
            x: x0.into_inner(),
            delta: config.delta0,
            cumulative_cost: 0,
            rngs: RngStream::per_objective(config.seed, num_objectives),
            history: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<IterationRecord>,
    pub final_x: DVector<f64>,
    pub final_delta: f64,
    pub cumulative_cost: u64,
}

fn marginal_or_best(
    gradients: &[DVector<f64>],
    tol: f64,
) -> Result<MarginalSolution, SolverError> {
    match solve_marginal(gradients, tol) {
        Ok(s) => Ok(s),
        Err(MarginalError::ToleranceNotReached { best }) => {
            warn!("marginal subproblem stopped with gap {:.3e}", best.residual);
            Ok(best)
        }
        Err(e) => Err(e.into()),
    }
}

/// One trust-region iteration: sample, model, direction, step, trial sample,
/// acceptance test and radius update.
pub fn smop_iterate<O: Oracle + ?Sized>(
    state: &mut TrustRegionState,
    oracle: &O,
    config: &SolverConfig,
) -> Result<IterationRecord, SolverError> {
    let spec = oracle.spec();
    let q = spec.num_objectives;
    let alpha = alpha_at(config.alpha_schedule, state.k, q);
    let second_order = config.hessian_mode == HessianMode::Subsampled;
    let delta = state.delta;

    let sample = oracle.evaluate(
        &state.x,
        SampleRequest::new(delta, alpha).with_hessians(second_order),
        &mut state.rngs,
    )?;
    state.cumulative_cost += sample.cost;
    sample
        .validate(&spec)
        .map_err(|e| SolverError::InconsistentSample(e.to_string()))?;
    let marginal = marginal_or_best(&sample.gradients, config.marginal_tol)?;
    let model = build_model(
        &spec,
        &sample,
        config.hessian_mode,
        config.hessian_combination,
        &marginal.weights,
    )?;

    let (omega_true, phi_true) = if config.exact_metrics && spec.exact_available {
        let exact = oracle.exact_evaluate(&state.x)?;
        let omega = marginal_or_best(&exact.gradients, config.marginal_tol)?.omega;
        (Some(omega), Some(scalar_representation(exact.values.as_slice())))
    } else {
        (None, None)
    };

    let phi_tilde = model.phi();
    let mut rho = f64::NEG_INFINITY;
    let mut predicted_reduction = 0.0;
    let mut step = None;
    if marginal.omega > config.omega_tol {
        let c = match cauchy_step(&model, &marginal, delta, config.step_rule, config.refine_steps) {
            Ok(c) => Some(c),
            Err(SolverError::DegenerateDirection) => None,
            Err(e) => return Err(e),
        };
        if let Some(c) = c {
            let trial_x = &state.x + &c.step;
            let trial = oracle.evaluate(&trial_x, SampleRequest::new(delta, alpha), &mut state.rngs)?;
            state.cumulative_cost += trial.cost;
            rho = compute_rho(phi_tilde, trial.phi(), c.predicted_reduction, config.rho_guard);
            predicted_reduction = c.predicted_reduction;
            step = Some((trial_x, c.step.norm()));
        }
    }

    let success = rho >= config.eta1 && marginal.omega > config.theta * delta;
    let mut step_norm = 0.0;
    if success {
        let (trial_x, norm) = step.expect("a successful iteration has a trial point");
        state.x = trial_x;
        step_norm = norm;
        state.delta = config.delta_max.min(config.gamma2 * delta);
    } else {
        state.delta = config.gamma1 * delta;
    }

    let record = IterationRecord {
        k: state.k,
        omega_m: marginal.omega,
        omega_true,
        phi_tilde,
        phi_true,
        rho,
        delta,
        success,
        step_norm,
        predicted_reduction,
        beta: model.beta,
        cost_so_far: state.cumulative_cost,
        sample_sizes: sample.sample_sizes.clone(),
    };
    debug!(
        "k={} omega_m={:.3e} delta={:.3e} rho={:.3} success={}",
        record.k, record.omega_m, delta, rho, success
    );
    state.history.push(record.clone());
    state.k += 1;
    Ok(record)
}

/// Runs `config.k_max` iterations from `x0`, streaming records into `sink`.
pub fn run_with_sink<O: Oracle + ?Sized>(
    oracle: &O,
    config: &SolverConfig,
    x0: DecisionVector,
    sink: &mut dyn RecordSink,
) -> Result<RunOutput, SolverError> {
    config.validate()?;
    let spec = oracle.spec();
    let x0 = x0.for_oracle(&spec)?;
    let mut state = TrustRegionState::new(x0, config, spec.num_objectives);
    for _ in 0..config.k_max {
        let record = smop_iterate(&mut state, oracle, config)?;
        sink.record(&record);
    }
    Ok(RunOutput {
        records: state.history,
        final_x: state.x,
        final_delta: state.delta,
        cumulative_cost: state.cumulative_cost,
    })
}

pub fn run<O: Oracle + ?Sized>(
    oracle: &O,
    config: &SolverConfig,
    x0: DecisionVector,
) -> Result<RunOutput, SolverError> {
    run_with_sink(oracle, config, x0, &mut |_: &IterationRecord| {})
}
