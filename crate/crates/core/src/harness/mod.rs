//! Experiment plumbing: spec files, multi-seed runs, baselines and outputs.

pub mod emit;
pub mod experiment;
pub mod smg;
pub mod spec;

pub use emit::{emit, summary_path, write_csv, write_json};
pub use experiment::{
    exact_omega, run_experiment, run_front_experiment, ExperimentResult, FinalPoint, MetricRow,
    Summary,
};
pub use smg::{run_smg, smg_baseline_step};
pub use spec::{Algorithm, ExperimentSpec, OutputFormat, ProblemSpec};
