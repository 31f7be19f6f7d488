//! Multi-simulation runs and their metric tables.

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smg::run_smg;
use super::spec::{Algorithm, ExperimentSpec};
use crate::config::{ConfigError, SolverConfig};
use crate::error::Result;
use crate::marginal::{solve_marginal, MarginalError};
use crate::oracles::FullBatch;
use crate::pareto::{run_front, FrontOutput};
use crate::solver::{self, IterationRecord, SolverError};
use crate::types::{scalar_representation, DecisionVector, Oracle};

/// One line of the metric table. Exact quantities are NaN when the oracle
/// cannot evaluate them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub simulation: usize,
    pub k: usize,
    pub omega_true: f64,
    pub phi_true: f64,
    pub scalar_products: u64,
    pub delta: f64,
    pub success: u8,
}

impl MetricRow {
    pub const HEADER: [&'static str; 7] = [
        "simulation",
        "k",
        "omega_true",
        "phi_true",
        "scalar_products",
        "delta",
        "success",
    ];

    pub fn from_record(simulation: usize, r: &IterationRecord) -> Self {
        Self {
            simulation,
            k: r.k,
            omega_true: r.omega_true.unwrap_or(f64::NAN),
            phi_true: r.phi_true.unwrap_or(f64::NAN),
            scalar_products: r.cost_so_far,
            delta: r.delta,
            success: u8::from(r.success),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub simulation: usize,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub final_x: DVector<f64>,
    pub cost: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalPoint {
    pub simulation: usize,
    pub seed: u64,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub omega: f64,
    pub scalar_products: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationFailure {
    pub simulation: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub algorithm: String,
    pub num_simulations: usize,
    pub final_points: Vec<FinalPoint>,
    /// Mean of the final iterates and its exact objective values.
    pub mean_final_x: Vec<f64>,
    pub mean_final_f: Vec<f64>,
    pub failures: Vec<SimulationFailure>,
    pub config: toml::Table,
}

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub rows: Vec<MetricRow>,
    pub simulations: Vec<SimulationResult>,
    pub summary: Summary,
}

/// Exact values and marginal at `x`, when available.
pub fn exact_metrics<O: Oracle + ?Sized>(oracle: &O, x: &DVector<f64>) -> Option<(Vec<f64>, f64)> {
    if !oracle.spec().exact_available {
        return None;
    }
    let e = oracle.exact_evaluate(x).ok()?;
    let omega = match solve_marginal(&e.gradients, 1e-10) {
        Ok(s) => s.omega,
        Err(MarginalError::ToleranceNotReached { best }) => best.omega,
        Err(_) => return None,
    };
    Some((e.values.iter().copied().collect(), omega))
}

/// Exact marginal at `x`, NaN when unavailable.
pub fn exact_omega<O: Oracle + ?Sized>(oracle: &O, x: &DVector<f64>) -> f64 {
    exact_metrics(oracle, x).map_or(f64::NAN, |m| m.1)
}

fn simulation_seed(base: u64, index: usize) -> std::result::Result<u64, ConfigError> {
    base.checked_add(index as u64)
        .filter(|s| *s <= i64::MAX as u64)
        .ok_or_else(|| ConfigError::invalid("seed", "seed + simulation index overflows"))
}

/// One simulation of `spec` with seed `spec.solver.seed + index`.
pub fn run_simulation<O: Oracle + ?Sized>(
    oracle: &O,
    spec: &ExperimentSpec,
    index: usize,
) -> std::result::Result<SimulationResult, SolverError> {
    let seed = simulation_seed(spec.solver.seed, index)?;
    let config = SolverConfig {
        seed,
        ..spec.solver.clone()
    };
    let x0 = DecisionVector::from_slice(&spec.start(oracle.spec().dimension)?)?;
    let (records, final_x, cost) = match spec.algorithm {
        Algorithm::Smop => {
            let out = solver::run(oracle, &config, x0)?;
            (out.records, out.final_x, out.cumulative_cost)
        }
        Algorithm::Dmop => {
            let out = solver::run(&FullBatch(oracle), &config, x0)?;
            (out.records, out.final_x, out.cumulative_cost)
        }
        Algorithm::Smg => run_smg(oracle, &config, x0, spec.smg.step0, spec.smg.batch)?,
    };
    Ok(SimulationResult {
        simulation: index,
        seed,
        records,
        final_x,
        cost,
    })
}

fn algorithm_label(a: Algorithm) -> String {
    match a {
        Algorithm::Smg => "smg (simplified baseline)".into(),
        other => other.to_string(),
    }
}

/// Runs every simulation of `spec` in a worker pool and merges the results in
/// simulation order. A failing simulation is reported in the summary and
/// does not stop the others.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let oracle = spec.problem.build()?;
    let oracle: &dyn Oracle = oracle.as_ref();
    let dimension = oracle.spec().dimension;
    spec.start(dimension)?;
    simulation_seed(spec.solver.seed, spec.num_simulations - 1)?;
    let work = || {
        (0..spec.num_simulations)
            .into_par_iter()
            .map(|i| (i, run_simulation(oracle, spec, i)))
            .collect::<Vec<_>>()
    };
    let outcomes = match rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
    {
        Ok(pool) => pool.install(work),
        Err(e) => {
            warn!("worker pool unavailable ({e}), using the global pool");
            work()
        }
    };

    let mut rows = Vec::new();
    let mut simulations = Vec::new();
    let mut failures = Vec::new();
    let mut final_points = Vec::new();
    for (i, outcome) in outcomes {
        match outcome {
            Ok(sim) => {
                rows.extend(sim.records.iter().map(|r| MetricRow::from_record(i, r)));
                let (f, omega) = exact_metrics(oracle, &sim.final_x).unwrap_or((Vec::new(), f64::NAN));
                final_points.push(FinalPoint {
                    simulation: i,
                    seed: sim.seed,
                    x: sim.final_x.iter().copied().collect(),
                    f,
                    omega,
                    scalar_products: sim.cost,
                });
                simulations.push(sim);
            }
            Err(e) => {
                warn!("simulation {i} failed: {e}");
                failures.push(SimulationFailure {
                    simulation: i,
                    seed: spec.solver.seed + i as u64,
                    message: e.to_string(),
                });
            }
        }
    }
    let mut mean = DVector::zeros(dimension);
    for s in &simulations {
        mean += &s.final_x;
    }
    let (mean_final_x, mean_final_f) = if simulations.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        mean /= simulations.len() as f64;
        let f = exact_metrics(oracle, &mean).map(|m| m.0).unwrap_or_default();
        (mean.iter().copied().collect(), f)
    };
    info!(
        "{} simulations finished, {} failed",
        simulations.len(),
        failures.len()
    );
    Ok(ExperimentResult {
        rows,
        simulations,
        summary: Summary {
            algorithm: algorithm_label(spec.algorithm),
            num_simulations: spec.num_simulations,
            final_points,
            mean_final_x,
            mean_final_f,
            failures,
            config: spec.resolved(),
        },
    })
}

/// Front exploration for the spec's problem, seeded by `spec.solver.seed`.
pub fn run_front_experiment(spec: &ExperimentSpec) -> Result<FrontOutput> {
    let oracle = spec.problem.build()?;
    let front = spec.front_config(oracle.spec().dimension)?;
    run_front(oracle.as_ref(), &front, &spec.solver, spec.solver.seed)
}

/// Scalarization of the final exact values, NaN when unavailable.
pub fn final_phi(point: &FinalPoint) -> f64 {
    if point.f.is_empty() {
        f64::NAN
    } else {
        scalar_representation(&point.f)
    }
}
