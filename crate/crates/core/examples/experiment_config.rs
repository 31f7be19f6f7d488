//! An experiment from a flat config with overrides, written as CSV plus summary.

use smop::harness::experiment::final_phi;
use smop::harness::{emit, run_experiment, ExperimentSpec};

const CONFIG: &str = r#"
problem = "test1"
sigma = 0.1
algorithm = "smop"
k_max = 200
num_simulations = 4
seed = 42
output_format = "csv"
"#;

fn main() -> smop::Result<()> {
    let overrides = vec!["sigma=0.05".to_string()];
    let spec = ExperimentSpec::from_kv_str_with_overrides(CONFIG, &overrides, None)?;
    let result = run_experiment(&spec)?;
    let path = std::env::temp_dir().join("smop_experiment.csv");
    let sidecar = emit(&result, &path, spec.output_format)?;
    println!("{} rows -> {}", result.rows.len(), path.display());
    println!("summary -> {}", sidecar.display());
    for p in &result.summary.final_points {
        println!("seed {}: x = {:.4?}, phi = {:.4}, omega = {:.2e}", p.seed, p.x, final_phi(p), p.omega);
    }
    Ok(())
}
