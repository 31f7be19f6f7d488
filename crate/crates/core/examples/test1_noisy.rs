//! Noisy Test 1 from (9, 9): ten seeds, final points and their marginals.

use smop::harness::exact_omega;
use smop::oracles::{AnalyticProblem, NoiseSpec, NoisyProblem};
use smop::{run, DecisionVector, SolverConfig};

fn main() -> smop::Result<()> {
    let oracle = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::gaussian(0.1))?;
    println!("seed  x_1       x_2       omega");
    for seed in 0..10 {
        let config = SolverConfig { seed, ..Default::default() };
        let out = run(&oracle, &config, DecisionVector::from_slice(&[9.0, 9.0])?)?;
        let x = &out.final_x;
        println!("{seed:<5} {:<9.4} {:<9.4} {:.2e}", x[0], x[1], exact_omega(&oracle, x));
    }
    Ok(())
}
