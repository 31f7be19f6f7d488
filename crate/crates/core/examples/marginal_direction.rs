//! The common descent direction of a few gradients.

use nalgebra::DVector;
use smop::marginal::{brute_force_marginal, solve_marginal_q2_closed_form};
use smop::solve_marginal;

fn main() -> Result<(), smop::marginal::MarginalError> {
    let gradients = vec![
        DVector::from_vec(vec![2.0, 0.0, 1.0]),
        DVector::from_vec(vec![0.0, 2.0, 1.0]),
        DVector::from_vec(vec![1.0, 1.0, -1.0]),
    ];
    let sol = solve_marginal(&gradients, 1e-10)?;
    println!("omega     = {:.6}", sol.omega);
    println!("direction = {:?}", sol.direction.as_slice());
    println!("weights   = {:?}", sol.weights);
    println!("max <g_i, d> = {:.6}", sol.max_directional_derivative(&gradients));
    println!("sampled estimate = {:.6}", brute_force_marginal(&gradients, 100_000)?);

    let pair = solve_marginal_q2_closed_form(&gradients[0], &gradients[1])?;
    println!("two gradients: omega {:.6}, weights {:?}", pair.omega, pair.weights);
    Ok(())
}
