//! Two-group logistic regression: adaptive subsampling against full batches.
//!
//! Pass a CSV file (label first, header row, sensitive feature in column 1)
//! to use real data instead of the synthetic set.

use smop::oracles::dataset::{load_dataset, DatasetOptions};
use smop::oracles::{FiniteSumProblem, FullBatch};
use smop::{run, DecisionVector, SolverConfig};

fn main() -> smop::Result<()> {
    let problem = match std::env::args().nth(1) {
        Some(path) => load_dataset(
            path.as_ref(),
            &DatasetOptions {
                has_header: true,
                ..Default::default()
            },
        )?,
        None => FiniteSumProblem::synthetic(300, 10, 0.1, 7)?,
    };
    let n = problem.dimension();
    println!(
        "{} rows in groups of {} and {}, {n} parameters",
        problem.labels().len(),
        problem.groups()[0].len(),
        problem.groups()[1].len()
    );
    let config = SolverConfig {
        k_max: 150,
        theta: 0.1,
        ..Default::default()
    };
    let x0 = DecisionVector::from_slice(&vec![0.0; n])?;
    let sampled = run(&problem, &config, x0.clone())?;
    let full = run(&FullBatch(&problem), &config, x0)?;
    for (name, out) in [("subsampled", &sampled), ("full batch", &full)] {
        let last = out.records.last().unwrap();
        println!(
            "{name:<10}  omega {:.3e}  phi {:.5}  scalar products {}",
            last.omega_true.unwrap(),
            last.phi_true.unwrap(),
            out.cumulative_cost
        );
    }
    Ok(())
}
