//! Adaptive sample sizes for finite-sum objectives.
//!
//! A subsample of size
//!
//! ```text
//! n >= B^2 / delta^p * (1 + sqrt(8 ln(1 / (1 - alpha))))^2
//! ```
//!
//! makes the subsampled value (`p = 4`, `B` a bound on the loss terms) or
//! gradient (`p = 2`, `B` a bound on the gradient terms) accurate to `delta^2`
//! or `delta` with probability at least `alpha`.

/// Which quantity the subsample has to make accurate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Value,
    Gradient,
}

impl SampleKind {
    fn radius_power(self) -> i32 {
        match self {
            SampleKind::Value => 4,
            SampleKind::Gradient => 2,
        }
    }
}

/// `(1 + sqrt(8 ln(1 / (1 - alpha))))^2`.
pub fn confidence_factor(alpha: f64) -> f64 {
    let t = 1.0 + (8.0 * (1.0 / (1.0 - alpha)).ln()).sqrt();
    t * t
}

/// Unrounded sample-size bound.
pub fn sample_size_bound(kind: SampleKind, bound: f64, delta: f64, alpha: f64) -> f64 {
    bound * bound / delta.powi(kind.radius_power()) * confidence_factor(alpha)
}

/// Ceiling of the bound, at least 1 and at most `group_size`.
pub fn required_sample_size(
    kind: SampleKind,
    bound: f64,
    delta: f64,
    alpha: f64,
    group_size: usize,
) -> usize {
    let raw = sample_size_bound(kind, bound, delta, alpha).ceil();
    let n = if raw.is_nan() || raw >= group_size as f64 {
        group_size
    } else {
        raw as usize
    };
    n.clamp(1, group_size.max(1))
}
