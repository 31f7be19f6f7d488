//! The marginal subproblem `omega = -min_{|d| <= 1} max_i <g_i, d>`.
//!
//! With the Euclidean norm the subproblem is dual to the minimum-norm point of
//! the convex hull of the gradients:
//!
//! ```text
//! omega = min_{lambda in simplex} | sum_i lambda_i g_i |
//! ```
//!
//! and the minimizing direction is `-v / |v|` for the min-norm point `v`. The
//! general solver runs Wolfe's min-norm-point iteration (Frank-Wolfe major
//! steps toward the most violating vertex, fully corrective affine minor
//! steps) on the Gram matrix, so its cost depends on `q` only once the Gram
//! matrix is formed. Every return carries a certified gap: for any `v` in the
//! hull, `min_i <g_i, v> / |v|` is a lower bound on `omega` and `|v|` an upper
//! bound.
//!
//! At degenerate points the set of minimizing directions may not be a
//! singleton; the solver returns one of them.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error, Clone)]
pub enum MarginalError {
    #[error("gradient {0} contains NaN or infinite entries")]
    NonFinite(usize),
    #[error("no gradients given")]
    Empty,
    #[error("gradient {index} has length {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("duality gap {} above tolerance after the iteration cap", best.residual)]
    ToleranceNotReached { best: MarginalSolution },
    #[error("brute force needs at least 1000 directions, got {0}")]
    TooFewDirections(usize),
}

/// Solution of the marginal subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSolution {
    /// `omega` (or `omega_m` for approximate gradients); never negative.
    pub omega: f64,
    /// Minimizing direction with `|direction| <= 1`; zero at critical points.
    pub direction: DVector<f64>,
    /// Dual simplex weights `lambda`.
    pub weights: Vec<f64>,
    /// Certified gap between `omega` and the best lower bound.
    pub residual: f64,
}

impl MarginalSolution {
    /// `max_i <g_i, direction>`, equal to `-omega` when the direction is nonzero.
    pub fn max_directional_derivative(&self, gradients: &[DVector<f64>]) -> f64 {
        gradients
            .iter()
            .map(|g| g.dot(&self.direction))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_inputs(gradients: &[DVector<f64>]) -> Result<usize, MarginalError> {
    let first = gradients.first().ok_or(MarginalError::Empty)?;
    let n = first.len();
    for (i, g) in gradients.iter().enumerate() {
        if g.len() != n {
            return Err(MarginalError::DimensionMismatch {
                index: i,
                expected: n,
                found: g.len(),
            });
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(MarginalError::NonFinite(i));
        }
    }
    Ok(n)
}

fn gradient_scale(gradients: &[DVector<f64>]) -> f64 {
    gradients.iter().map(|g| g.norm()).fold(1.0, f64::max)
}

/// Builds the solution from dual weights: `v = sum lambda_i g_i`, `omega = |v|`,
/// and the gap against the lower bound `min_i <g_i, v> / |v|`.
fn finish(gradients: &[DVector<f64>], weights: Vec<f64>, tolerance: f64) -> MarginalSolution {
    let n = gradients[0].len();
    let mut v = DVector::zeros(n);
    for (w, g) in weights.iter().zip(gradients) {
        if *w != 0.0 {
            v.axpy(*w, g, 1.0);
        }
    }
    let omega = v.norm();
    let residual = if omega > 0.0 {
        let lower = gradients
            .iter()
            .map(|g| g.dot(&v) / omega)
            .fold(f64::INFINITY, f64::min)
            .max(0.0);
        (omega - lower).max(0.0)
    } else {
        0.0
    };
    let direction = if omega > residual.max(tolerance) {
        -v / omega
    } else {
        DVector::zeros(n)
    };
    MarginalSolution {
        omega,
        direction,
        weights,
        residual,
    }
}

/// Solves the marginal subproblem for any number of gradients.
///
/// `tolerance` bounds the certified gap relative to `max(1, max_i |g_i|)`.
/// Near critical points the gap certificate `omega - min_i <g_i, v> / omega`
/// is limited by round-off in `<g_i, v>`; a solution whose primal-dual gap
/// `omega^2 - min_i <g_i, v>` is at round-off level is accepted as well.
pub fn solve_marginal(
    gradients: &[DVector<f64>],
    tolerance: f64,
) -> Result<MarginalSolution, MarginalError> {
    if !(tolerance > 0.0) {
        return Err(MarginalError::BadTolerance(tolerance));
    }
    let n = check_inputs(gradients)?;
    let q = gradients.len();
    let scale = gradient_scale(gradients);
    let gram = DMatrix::from_fn(q, q, |i, j| gradients[i].dot(&gradients[j]));
    let mut weights = wolfe_min_norm(&gram, 10 * q * n + 1000);
    polish(gradients, &mut weights);
    let solution = finish(gradients, weights, tolerance);
    let gap = solution.residual * solution.omega;
    let roundoff = 64.0 * f64::EPSILON * scale * scale;
    if solution.residual > tolerance * scale && gap > roundoff {
        return Err(MarginalError::ToleranceNotReached { best: solution });
    }
    Ok(solution)
}

/// Wolfe's min-norm-point iteration over the hull of the Gram matrix's vectors.
fn wolfe_min_norm(gram: &DMatrix<f64>, max_iter: usize) -> Vec<f64> {
    let q = gram.nrows();
    let diag_scale = (0..q).map(|i| gram[(i, i)]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let start = (0..q)
        .min_by(|&a, &b| gram[(a, a)].total_cmp(&gram[(b, b)]))
        .unwrap_or(0);
    let mut lambda = vec![0.0; q];
    lambda[start] = 1.0;
    let mut active = vec![start];
    let mut iterations = 0;

    'major: while iterations < max_iter {
        iterations += 1;
        // <g_i, v> for every vertex
        let gv: Vec<f64> = (0..q)
            .map(|i| active.iter().map(|&j| gram[(i, j)] * lambda[j]).sum())
            .collect();
        let vv: f64 = active.iter().map(|&i| lambda[i] * gv[i]).sum();
        let (j, gvj) = gv
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if vv - gvj <= 1e-15 * diag_scale || active.contains(&j) {
            break;
        }
        active.push(j);

        // Minor cycle: move toward the affine minimizer until it is interior.
        loop {
            iterations += 1;
            let Some(mu) = affine_minimizer(gram, &active) else {
                active.pop();
                break 'major;
            };
            if mu.iter().all(|&m| m > 1e-14) {
                for (&i, &m) in active.iter().zip(&mu) {
                    lambda[i] = m;
                }
                break;
            }
            let mut theta: f64 = 1.0;
            for (&i, &m) in active.iter().zip(&mu) {
                if m <= 1e-14 {
                    let denom = lambda[i] - m;
                    if denom > 0.0 {
                        theta = theta.min(lambda[i] / denom);
                    }
                }
            }
            for (&i, &m) in active.iter().zip(&mu) {
                lambda[i] = (1.0 - theta) * lambda[i] + theta * m;
            }
            active.retain(|&i| {
                if lambda[i] <= 1e-14 {
                    lambda[i] = 0.0;
                    false
                } else {
                    true
                }
            });
            let total: f64 = active.iter().map(|&i| lambda[i]).sum();
            for &i in &active {
                lambda[i] /= total;
            }
            if active.len() <= 1 || iterations >= max_iter {
                break;
            }
        }
    }
    let total: f64 = lambda.iter().sum();
    lambda.iter().map(|l| l / total).collect()
}

/// Re-solves the affine min-norm problem on the final active face from the
/// gradients themselves (least squares on differences), which avoids the
/// squared conditioning of the Gram system. Kept only if the weights stay
/// positive and the norm does not grow.
fn polish(gradients: &[DVector<f64>], weights: &mut [f64]) {
    let active: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    if active.len() < 2 {
        return;
    }
    let base = &gradients[active[0]];
    let n = base.len();
    let diffs = DMatrix::from_fn(n, active.len() - 1, |r, c| {
        gradients[active[c + 1]][r] - base[r]
    });
    let Ok(mu) = diffs.svd(true, true).solve(&(-base), 1e-13) else {
        return;
    };
    let head = 1.0 - mu.sum();
    let candidate: Vec<f64> = std::iter::once(head).chain(mu.iter().copied()).collect();
    if candidate.iter().any(|&m| !(m > 0.0)) {
        return;
    }
    let norm_of = |ws: &[f64]| {
        let mut v = DVector::zeros(n);
        for (&i, &w) in active.iter().zip(ws) {
            v.axpy(w, &gradients[i], 1.0);
        }
        v.norm()
    };
    let current: Vec<f64> = active.iter().map(|&i| weights[i]).collect();
    if norm_of(&candidate) <= norm_of(&current) {
        for (&i, &m) in active.iter().zip(&candidate) {
            weights[i] = m;
        }
    }
}

/// Minimizes `|sum_{i in S} mu_i g_i|` subject to `sum mu_i = 1` (no sign constraint).
fn affine_minimizer(gram: &DMatrix<f64>, active: &[usize]) -> Option<Vec<f64>> {
    let s = active.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            kkt[(a, b)] = gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let solution = kkt
        .clone()
        .lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-13).ok())?;
    let mu: Vec<f64> = solution.iter().take(s).copied().collect();
    let total: f64 = mu.iter().sum();
    if !total.is_finite() || total.abs() < 1e-12 {
        return None;
    }
    Some(mu.iter().map(|m| m / total).collect())
}

/// Closed form for two gradients: `lambda* = clamp(<g2, g2 - g1> / |g1 - g2|^2, 0, 1)`
/// weights `(lambda*, 1 - lambda*)`; identical gradients give `lambda* = 0`.
pub fn solve_marginal_q2_closed_form(
    g1: &DVector<f64>,
    g2: &DVector<f64>,
) -> Result<MarginalSolution, MarginalError> {
    let grads = [g1.clone(), g2.clone()];
    check_inputs(&grads)?;
    let diff = g1 - g2;
    let dd = diff.norm_squared();
    let lambda = if dd > 0.0 {
        (g2.dot(&(g2 - g1)) / dd).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(finish(&grads, vec![lambda, 1.0 - lambda], DEFAULT_TOLERANCE))
}

/// Sampling-based estimate of `omega`, for tests.
///
/// The search runs in the span of the gradients (components orthogonal to it
/// do not change any `<g_i, d>` but use up the unit ball). Half the budget goes
/// to uniformly distributed directions, the rest to successively narrower
/// random searches around the best direction found. The result never exceeds
/// the true value by more than round-off, since every candidate is a feasible
/// direction; `d = 0` is always a candidate.
pub fn brute_force_marginal(
    gradients: &[DVector<f64>],
    num_directions: usize,
) -> Result<f64, MarginalError> {
    if num_directions < 1000 {
        return Err(MarginalError::TooFewDirections(num_directions));
    }
    check_inputs(gradients)?;
    let basis = orthonormal_span(gradients);
    let r = basis.len();
    if r == 0 {
        return Ok(0.0);
    }
    let coords: Vec<DVector<f64>> = gradients
        .iter()
        .map(|g| DVector::from_iterator(r, basis.iter().map(|b| b.dot(g))))
        .collect();
    // value of u = -d: min_i <c_i, u>
    let value = |u: &DVector<f64>| coords.iter().map(|c| c.dot(u)).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha12Rng::seed_from_u64(0x6d61_7267);
    let gaussian = |rng: &mut ChaCha12Rng| {
        DVector::from_iterator(r, (0..r).map(|_| StandardNormal.sample(rng)))
    };

    let mut best_u = DVector::zeros(r);
    let mut best = 0.0f64;
    let global = num_directions / 2;
    for _ in 0..global {
        let g: DVector<f64> = gaussian(&mut rng);
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        let u = g / norm;
        let v = value(&u);
        if v > best {
            best = v;
            best_u = u;
        }
    }
    if best_u.norm() == 0.0 {
        return Ok(0.0);
    }
    let rounds = 40;
    let per_round = (num_directions - global) / rounds;
    let mut radius = 0.5;
    for _ in 0..rounds {
        let centre = best_u.clone();
        for _ in 0..per_round {
            let step: DVector<f64> = gaussian(&mut rng) * (radius / (r as f64).sqrt());
            let candidate = &centre + step;
            let norm = candidate.norm();
            if norm == 0.0 {
                continue;
            }
            let u = candidate / norm;
            let v = value(&u);
            if v > best {
                best = v;
                best_u = u;
            }
        }
        radius *= 0.75;
    }
    Ok(best.max(0.0))
}

/// `omega` estimate over an explicit direction set (plus `d = 0`).
pub fn brute_force_marginal_over(
    gradients: &[DVector<f64>],
    directions: &[DVector<f64>],
) -> Result<f64, MarginalError> {
    check_inputs(gradients)?;
    let best = directions
        .iter()
        .filter(|d| d.norm() <= 1.0 + 1e-12)
        .map(|d| {
            -gradients
                .iter()
                .map(|g| g.dot(d))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(0.0, f64::max);
    Ok(best)
}

fn orthonormal_span(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let scale = gradient_scale(vectors);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-12 * scale {
            basis.push(w / norm);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn single_gradient_reduces_to_norm() {
        let g = v(&[3.0, 4.0]);
        let s = solve_marginal(&[g.clone()], DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(s.omega, 5.0, epsilon = 1e-14);
        assert_relative_eq!(s.direction, -&g / 5.0, epsilon = 1e-14);
        assert_eq!(s.weights, vec![1.0]);
    }

    #[test]
    fn opposing_gradients_are_critical() {
        let s = solve_marginal(&[v(&[5.0, 5.0]), v(&[-5.0, -5.0])], DEFAULT_TOLERANCE).unwrap();
        assert!(s.omega.abs() < 1e-12);
        assert_eq!(s.direction, DVector::zeros(2));
        assert_relative_eq!(s.weights[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.weights[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn test1_at_nine_nine() {
        let grads = [v(&[18.0, 18.0]), v(&[8.0, 8.0])];
        let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
        // oracle: sampled directions over the unit disc
        let brute = brute_force_marginal(&grads, 100_000).unwrap();
        assert!((brute - 8.0 * 2f64.sqrt()).abs() < 1e-6, "brute = {brute}");
        assert_relative_eq!(s.omega, 11.313_708_498_984_761, epsilon = 1e-10);
        assert_relative_eq!(s.weights[1], 1.0, epsilon = 1e-12);
        let expected = -v(&[1.0, 1.0]) / 2f64.sqrt();
        assert_relative_eq!(s.direction, expected, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_examples() {
        let s = solve_marginal_q2_closed_form(&v(&[3.0, 4.0]), &v(&[3.0, 4.0])).unwrap();
        assert_relative_eq!(s.omega, 5.0, epsilon = 1e-14);
        assert_eq!(s.weights, vec![0.0, 1.0]);

        let s = solve_marginal_q2_closed_form(&v(&[1.0, 0.0]), &v(&[-1.0, 0.0])).unwrap();
        assert_eq!(s.weights, vec![0.5, 0.5]);
        assert_eq!(s.omega, 0.0);

        let s = solve_marginal_q2_closed_form(&v(&[2.0, 0.0]), &v(&[0.0, 2.0])).unwrap();
        // dense lambda grid oracle for min |lambda (2,0) + (1-lambda) (0,2)|
        let grid_min = (0..=100_000)
            .map(|k| {
                let l = k as f64 / 100_000.0;
                (4.0 * l * l + 4.0 * (1.0 - l) * (1.0 - l)).sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(grid_min, 2f64.sqrt(), epsilon = 1e-9);
        assert_relative_eq!(s.weights[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.omega, 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.direction, -v(&[1.0, 1.0]) / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn brute_force_examples() {
        let g = [v(&[3.0, 4.0])];
        let dirs = [v(&[0.6, 0.8]), v(&[-0.6, -0.8]), v(&[1.0, 0.0])];
        assert_eq!(brute_force_marginal_over(&g, &dirs).unwrap(), 5.0);

        let g = [v(&[1.0, 0.0]), v(&[0.0, 1.0])];
        let b = brute_force_marginal(&g, 100_000).unwrap();
        assert!((b - 0.5f64.sqrt()).abs() < 0.02, "{b}");

        assert_eq!(brute_force_marginal(&[v(&[0.0, 0.0])], 1000).unwrap(), 0.0);
        assert!(matches!(
            brute_force_marginal(&g, 10),
            Err(MarginalError::TooFewDirections(10))
        ));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            solve_marginal(&[v(&[1.0, f64::NAN])], 1e-10),
            Err(MarginalError::NonFinite(0))
        ));
        assert!(matches!(solve_marginal(&[], 1e-10), Err(MarginalError::Empty)));
        assert!(matches!(
            solve_marginal(&[v(&[1.0]), v(&[1.0, 2.0])], 1e-10),
            Err(MarginalError::DimensionMismatch { index: 1, .. })
        ));
        assert!(matches!(
            solve_marginal(&[v(&[1.0])], 0.0),
            Err(MarginalError::BadTolerance(_))
        ));
    }

    #[test]
    fn collinear_gradients() {
        // three gradients on a line through the origin's far side
        let grads = [v(&[1.0, 1.0]), v(&[2.0, 2.0]), v(&[3.0, 3.0])];
        let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(s.omega, 2f64.sqrt(), epsilon = 1e-12);
        // collinear through the origin
        let grads = [v(&[1.0, 1.0]), v(&[-2.0, -2.0]), v(&[3.0, 3.0])];
        let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
        assert!(s.omega < 1e-12);
        assert_eq!(s.direction, DVector::zeros(2));
    }

    #[test]
    fn more_gradients_than_dimensions() {
        // square around the origin: origin is in the hull
        let grads = [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[-1.0, 0.0]), v(&[0.0, -1.0])];
        let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
        assert!(s.omega < 1e-12);
        // shifted square: min-norm point is the nearest edge midpoint
        let grads = [v(&[2.0, -1.0]), v(&[2.0, 1.0]), v(&[4.0, 1.0]), v(&[4.0, -1.0])];
        let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(s.omega, 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.direction, v(&[-1.0, 0.0]), epsilon = 1e-12);
    }

    fn random_gradients(rng: &mut ChaCha12Rng, q: usize, n: usize) -> Vec<DVector<f64>> {
        (0..q)
            .map(|_| DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0))))
            .collect()
    }

    #[test]
    fn descent_and_duality_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let q = rng.random_range(1..=6);
            let n = rng.random_range(1..=8);
            let grads = random_gradients(&mut rng, q, n);
            let s = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
            assert!(s.omega >= 0.0);
            assert!(s.direction.norm() <= 1.0 + 1e-12);
            assert!(s.weights.iter().all(|&w| w >= 0.0));
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let mut comb = DVector::zeros(n);
            for (w, g) in s.weights.iter().zip(&grads) {
                comb.axpy(*w, g, 1.0);
            }
            assert!((s.omega - comb.norm()).abs() <= s.residual + 1e-15);
            if s.omega > DEFAULT_TOLERANCE {
                let worst = s.max_directional_derivative(&grads);
                assert!((worst + s.omega).abs() <= 1e-9, "{worst} vs {}", s.omega);
            }
        }
    }

    proptest! {
        #[test]
        fn scale_covariance(
            entries in proptest::collection::vec(-1.0f64..1.0, 12),
            c in 0.01f64..100.0,
        ) {
            let grads: Vec<DVector<f64>> = entries.chunks(3).map(|ch| v(ch)).collect();
            let scaled: Vec<DVector<f64>> = grads.iter().map(|g| g * c).collect();
            let a = solve_marginal(&grads, DEFAULT_TOLERANCE).unwrap();
            let b = solve_marginal(&scaled, DEFAULT_TOLERANCE).unwrap();
            prop_assert!((b.omega - c * a.omega).abs() <= 1e-9 * c.max(1.0));
            if a.omega > 1e-6 {
                prop_assert!((&a.direction - &b.direction).norm() <= 1e-8);
            }
        }

        #[test]
        fn closed_form_agrees(entries in proptest::collection::vec(-1.0f64..1.0, 8)) {
            let g1 = v(&entries[..4]);
            let g2 = v(&entries[4..]);
            let a = solve_marginal(&[g1.clone(), g2.clone()], DEFAULT_TOLERANCE).unwrap();
            let b = solve_marginal_q2_closed_form(&g1, &g2).unwrap();
            prop_assert!((a.omega - b.omega).abs() <= 1e-10);
            if a.omega > 1e-6 {
                prop_assert!((&a.direction - &b.direction).norm() <= 1e-10);
            }
        }
    }
}
