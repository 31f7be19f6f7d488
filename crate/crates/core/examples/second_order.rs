//! First-order models against models with subsampled Hessians.

use smop::oracles::FiniteSumProblem;
use smop::{run, DecisionVector, HessianMode, SolverConfig};

fn main() -> smop::Result<()> {
    let problem = FiniteSumProblem::synthetic(300, 10, 0.1, 7)?;
    let x0 = DecisionVector::from_slice(&vec![0.0; problem.dimension()])?;
    for mode in [HessianMode::Zero, HessianMode::Subsampled] {
        let config = SolverConfig {
            k_max: 150,
            theta: 0.1,
            hessian_mode: mode,
            ..Default::default()
        };
        let out = run(&problem, &config, x0.clone())?;
        let omega0 = out.records[0].omega_true.unwrap();
        let hit = out
            .records
            .iter()
            .find(|r| r.omega_true.unwrap() <= 0.1 * omega0)
            .map(|r| r.cost_so_far);
        let last = out.records.last().unwrap();
        println!(
            "{mode:?}: omega {omega0:.3e} -> {:.3e}, 10x reduction after {hit:?} scalar products, max beta {:.2}",
            last.omega_true.unwrap(),
            out.records.iter().map(|r| r.beta).fold(0.0, f64::max)
        );
    }
    Ok(())
}
