//! Pareto front of Test 1, written to `front.csv`.

use smop::oracles::{test1_front_distance, AnalyticProblem, NoiseSpec, NoisyProblem};
use smop::pareto::{run_front, FrontConfig};
use smop::SolverConfig;

fn main() -> smop::Result<()> {
    let oracle = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::gaussian(0.1))?;
    let front = FrontConfig::with_box(vec![(-1.0, 6.0); 2]);
    let out = run_front(&oracle, &front, &SolverConfig::default(), 0)?;
    for (i, r) in out.rounds.iter().enumerate() {
        println!("round {i}: {} candidates, archive {}", r.candidates, r.archive_size);
    }
    let worst = out
        .archive
        .members()
        .iter()
        .map(|m| test1_front_distance(m.f.as_slice()))
        .fold(0.0, f64::max);
    println!("largest distance to the analytic front: {worst:.2e}");
    out.archive.save_csv("front.csv".as_ref())?;
    println!("wrote front.csv");
    Ok(())
}
