//! Noisy Test 2: radius and marginal along one run.

use smop::oracles::{AnalyticProblem, NoiseSpec, NoisyProblem};
use smop::solver::run_with_sink;
use smop::{DecisionVector, IterationRecord, SolverConfig};

fn main() -> smop::Result<()> {
    let oracle = NoisyProblem::new(AnalyticProblem::Test2, NoiseSpec::gaussian(0.01))?;
    let config = SolverConfig {
        theta: 0.4,
        eta1: 0.4,
        seed: 1,
        ..Default::default()
    };
    let x0 = DecisionVector::from_slice(&[-0.5, 1.0])?;
    let mut print = |r: &IterationRecord| {
        if r.k % 50 == 0 {
            println!(
                "k {:>3}  delta {:.3e}  omega_m {:.3e}  omega {:.3e}  phi {:.4}",
                r.k,
                r.delta,
                r.omega_m,
                r.omega_true.unwrap_or(f64::NAN),
                r.phi_true.unwrap_or(f64::NAN)
            );
        }
    };
    let out = run_with_sink(&oracle, &config, x0, &mut print)?;
    println!("final x = {:?}", out.final_x.as_slice());
    Ok(())
}
