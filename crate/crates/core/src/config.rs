//! Solver parameters and their flat `key = value` file format.
//!
//! The file format is a flat TOML table (no sections). Every key is optional
//! and falls back to [`SolverConfig::default`]; unknown keys are rejected.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `delta0` | initial trust-region radius | `1.0` |
//! | `delta_max` | radius cap | `10.0` |
//! | `gamma1` | shrink factor on failure, in (0, 1) | `0.5` |
//! | `gamma2` | expansion factor on success, must equal `1 / gamma1` | `2.0` |
//! | `eta1` | acceptance threshold on the reduction ratio, in (0, 1) | `1e-4` |
//! | `theta` | criticality-to-radius coupling constant | `1e-4` |
//! | `alpha_schedule` | `"fixed:<p>"` or `"summable:<offset>"` | `"fixed:0.7071067811865476"` |
//! | `k_max` | iterations per run | `500` |
//! | `hessian_mode` | `"zero"` or `"subsampled"` | `"zero"` |
//! | `hessian_combination` | `"marginal"` (weights of the marginal solution) or `"uniform"` | `"marginal"` |
//! | `step_rule` | `"exact"` line minimization or `"bound"` (`min(delta, omega/beta)`) | `"exact"` |
//! | `refine_steps` | extra projected model-descent moves after the Cauchy step, 0..=5 | `0` |
//! | `rho_guard` | relative floor on the predicted reduction | `1e-14` |
//! | `omega_tol` | approximate marginal at or below which the point is treated as critical | `1e-12` |
//! | `marginal_tol` | certified duality gap of the direction subproblem | `1e-10` |
//! | `exact_metrics` | record exact marginal and scalarization per iteration | `true` |
//! | `seed` | base seed, 0..2^63 | `0` |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Probability schedule `alpha_k` for model accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSchedule {
    /// Constant probability in (0, 1).
    Fixed(f64),
    /// `alpha_k = (1 - (k + offset)^-2)^(1/q)`, so that `sum_k (1 - alpha_k^q)` is finite.
    SummableToOne { offset: u64 },
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule::Fixed(std::f64::consts::FRAC_1_SQRT_2)
    }
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            AlphaSchedule::Fixed(p) if !(p > 0.0 && p < 1.0) => Err(ConfigError::invalid(
                "alpha_schedule",
                format!("fixed probability {p} is outside (0, 1)"),
            )),
            AlphaSchedule::SummableToOne { offset } if offset < 2 => Err(ConfigError::invalid(
                "alpha_schedule",
                "summable offset must be at least 2",
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AlphaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaSchedule::Fixed(p) => write!(f, "fixed:{p}"),
            AlphaSchedule::SummableToOne { offset } => write!(f, "summable:{offset}"),
        }
    }
}

impl FromStr for AlphaSchedule {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::invalid("alpha_schedule", format!("cannot parse `{s}`"));
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        let schedule = match kind.trim() {
            "fixed" => AlphaSchedule::Fixed(arg.trim().parse().map_err(|_| bad())?),
            "summable" => AlphaSchedule::SummableToOne {
                offset: arg.trim().parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

impl Serialize for AlphaSchedule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AlphaSchedule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `alpha_k` for iteration `k` and `q` objectives.
pub fn alpha_at(schedule: AlphaSchedule, k: usize, q: usize) -> f64 {
    match schedule {
        AlphaSchedule::Fixed(p) => p,
        AlphaSchedule::SummableToOne { offset } => {
            let t = (k as f64) + offset as f64;
            (1.0 - t.powi(-2)).powf(1.0 / q as f64)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianMode {
    /// First-order models, `H_k = 0`.
    #[default]
    Zero,
    /// Subsampled Hessians from the same subsample as the values.
    Subsampled,
}

/// How per-objective Hessians are merged into the single model Hessian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HessianCombination {
    /// Weighted by the dual weights of the marginal subproblem.
    #[default]
    Marginal,
    Uniform,
}

/// Step length along the marginal direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// Exact minimizer of the piecewise-quadratic model over `[0, delta]`.
    #[default]
    Exact,
    /// `min(delta, omega_m / beta)`, the maximizer of the quadratic lower bound.
    Bound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub delta0: f64,
    pub delta_max: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub eta1: f64,
    pub theta: f64,
    pub alpha_schedule: AlphaSchedule,
    pub k_max: usize,
    pub hessian_mode: HessianMode,
    pub hessian_combination: HessianCombination,
    pub step_rule: StepRule,
    pub refine_steps: usize,
    pub rho_guard: f64,
    pub omega_tol: f64,
    pub marginal_tol: f64,
    pub exact_metrics: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            delta0: 1.0,
            delta_max: 10.0,
            gamma1: 0.5,
            gamma2: 2.0,
            eta1: 1e-4,
            theta: 1e-4,
            alpha_schedule: AlphaSchedule::default(),
            k_max: 500,
            hessian_mode: HessianMode::Zero,
            hessian_combination: HessianCombination::Marginal,
            step_rule: StepRule::Exact,
            refine_steps: 0,
            rho_guard: 1e-14,
            omega_tol: 1e-12,
            marginal_tol: 1e-10,
            exact_metrics: true,
            seed: 0,
        }
    }
}

pub const MAX_REFINE_STEPS: usize = 5;

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("{v} is not a positive number")))
            }
        };
        let unit = |field: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("{v} is outside (0, 1)")))
            }
        };
        positive("delta0", self.delta0)?;
        positive("delta_max", self.delta_max)?;
        if self.delta0 >= self.delta_max {
            return Err(ConfigError::invalid(
                "delta0",
                format!("{} must be below delta_max = {}", self.delta0, self.delta_max),
            ));
        }
        unit("gamma1", self.gamma1)?;
        if (self.gamma2 * self.gamma1 - 1.0).abs() > 1e-12 {
            return Err(ConfigError::invalid(
                "gamma2",
                format!("{} must equal 1 / gamma1 = {}", self.gamma2, 1.0 / self.gamma1),
            ));
        }
        unit("eta1", self.eta1)?;
        positive("theta", self.theta)?;
        self.alpha_schedule.validate()?;
        if self.k_max == 0 {
            return Err(ConfigError::invalid("k_max", "must be at least 1"));
        }
        if self.refine_steps > MAX_REFINE_STEPS {
            return Err(ConfigError::invalid(
                "refine_steps",
                format!("at most {MAX_REFINE_STEPS}"),
            ));
        }
        positive("rho_guard", self.rho_guard)?;
        positive("omega_tol", self.omega_tol)?;
        positive("marginal_tol", self.marginal_tol)?;
        if self.seed > i64::MAX as u64 {
            return Err(ConfigError::invalid("seed", "must be below 2^63"));
        }
        Ok(())
    }

    /// Parses and validates a flat key-value config.
    pub fn from_kv_str(text: &str) -> Result<Self, ConfigError> {
        let config: SolverConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_kv_string(&self) -> String {
        toml::to_string(self).expect("solver config serializes to a flat table")
    }

    /// Names of all keys understood by [`SolverConfig::from_kv_str`].
    pub fn keys() -> Vec<String> {
        match toml::Table::try_from(SolverConfig::default()) {
            Ok(table) => table.keys().cloned().collect(),
            Err(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn alpha_examples() {
        let fixed = AlphaSchedule::Fixed(0.5f64.sqrt());
        assert_relative_eq!(alpha_at(fixed, 7, 2), 0.707_106_781_186_547_5, epsilon = 1e-15);
        let summable = AlphaSchedule::SummableToOne { offset: 2 };
        assert_eq!(alpha_at(summable, 0, 1), 0.75);
        // (0.75)^(1/2) from 50-digit arithmetic
        assert_relative_eq!(alpha_at(summable, 0, 2), 0.866_025_403_784_438_6, epsilon = 1e-15);
    }

    #[test]
    fn summable_schedule_increases_to_one() {
        let s = AlphaSchedule::SummableToOne { offset: 3 };
        let mut prev = 0.0;
        for k in 0..1000 {
            let a = alpha_at(s, k, 3);
            assert!(a > prev && a < 1.0);
            prev = a;
        }
        assert!(1.0 - alpha_at(s, 1_000_000, 3) < 1e-12);
    }

    #[test]
    fn summable_partial_sums_bounded() {
        for (offset, q) in [(2u64, 1usize), (2, 2), (5, 3)] {
            let s = AlphaSchedule::SummableToOne { offset };
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for k in 0..1_000_000usize {
                lhs += 1.0 - alpha_at(s, k, q).powi(q as i32);
                rhs += 1.0 / ((k as f64) + offset as f64).powi(2);
                if k % 100_000 == 0 {
                    assert!(lhs <= rhs + 1e-9, "k={k}: {lhs} > {rhs}");
                }
            }
            assert!(lhs <= rhs + 1e-9);
        }
    }

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = SolverConfig::default();
        c.validate().unwrap();
        let text = c.to_kv_string();
        assert_eq!(SolverConfig::from_kv_str(&text).unwrap(), c);
    }

    #[test]
    fn parse_is_order_insensitive_and_rejects_unknown_keys() {
        let a = SolverConfig::from_kv_str("theta = 0.4\neta1 = 0.4\n").unwrap();
        let b = SolverConfig::from_kv_str("eta1 = 0.4\ntheta = 0.4\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.theta, 0.4);
        let err = SolverConfig::from_kv_str("thetta = 0.4\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(m) if m.contains("thetta")));
    }

    #[test]
    fn inconsistent_gamma_rejected() {
        let err = SolverConfig::from_kv_str("gamma1 = 0.5\ngamma2 = 3.0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { field, .. } if field == "gamma2"));
        let ok = SolverConfig::from_kv_str("gamma1 = 0.25\ngamma2 = 4.0\n").unwrap();
        assert_eq!(ok.gamma2, 4.0);
    }

    #[test]
    fn invalid_values_name_their_field() {
        let cases = [
            ("delta0 = 20.0", "delta0"),
            ("delta0 = -1.0", "delta0"),
            ("eta1 = 1.0", "eta1"),
            ("theta = 0.0", "theta"),
            ("k_max = 0", "k_max"),
            ("alpha_schedule = \"fixed:1.0\"", "alpha_schedule"),
            ("alpha_schedule = \"summable:1\"", "alpha_schedule"),
            ("refine_steps = 9", "refine_steps"),
        ];
        for (text, field) in cases {
            match SolverConfig::from_kv_str(text) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field, "{text}"),
                Err(ConfigError::Parse(m)) => assert!(m.contains(field), "{text}: {m}"),
                Ok(_) => panic!("{text} accepted"),
            }
        }
    }

    #[test]
    fn enum_keys_parse() {
        let c = SolverConfig::from_kv_str(
            "hessian_mode = \"subsampled\"\nstep_rule = \"bound\"\nalpha_schedule = \"summable:4\"\n",
        )
        .unwrap();
        assert_eq!(c.hessian_mode, HessianMode::Subsampled);
        assert_eq!(c.step_rule, StepRule::Bound);
        assert_eq!(c.alpha_schedule, AlphaSchedule::SummableToOne { offset: 4 });
    }

    #[test]
    fn keys_cover_all_fields() {
        let keys = SolverConfig::keys();
        for k in ["delta0", "gamma2", "alpha_schedule", "seed", "step_rule"] {
            assert!(keys.iter().any(|x| x == k), "{k}");
        }
        assert_eq!(keys.len(), 17);
    }

    proptest! {
        #[test]
        fn summable_alpha_in_unit_interval(k in 0usize..100_000, offset in 2u64..50, q in 1usize..6) {
            let a = alpha_at(AlphaSchedule::SummableToOne { offset }, k, q);
            prop_assert!(a > 0.0 && a < 1.0);
        }
    }
}
