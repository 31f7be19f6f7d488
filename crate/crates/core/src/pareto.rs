//! Pareto front exploration.
//!
//! An archive of mutually non-dominated points is grown round by round: every
//! member spawns Gaussian perturbations, every member and perturbation is
//! used as the start of short trust-region runs, and the union of old
//! members, perturbations and run end points is filtered back to its
//! non-dominated subset. Archive objective values are always exact (full
//! batch for finite sums), so the archive does not depend on sampling noise.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use nalgebra::DVector;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, SolverConfig};
use crate::error::{Error, Result};
use crate::oracles::OracleError;
use crate::rng::RngStream;
use crate::solver;
use crate::types::{DecisionVector, Oracle};

/// Stream id of the front's own random stream, away from the per-objective ids.
pub const FRONT_STREAM: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dominance {
    /// `f(y) < f(x)` in every component.
    #[default]
    Strict,
    /// `f(y) <= f(x)` in every component and `<` in at least one.
    Weak,
}

impl fmt::Display for Dominance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dominance::Strict => "strict",
            Dominance::Weak => "weak",
        })
    }
}

impl FromStr for Dominance {
    type Err = ConfigError;

    fn from_str(s: &str) -> std::result::Result<Self, ConfigError> {
        match s {
            "strict" => Ok(Dominance::Strict),
            "weak" => Ok(Dominance::Weak),
            other => Err(ConfigError::invalid(
                "dominance",
                format!("`{other}` is not `strict` or `weak`"),
            )),
        }
    }
}

/// Does `a` dominate `b`?
pub fn dominates(a: &[f64], b: &[f64], mode: Dominance) -> bool {
    match mode {
        Dominance::Strict => a.iter().zip(b).all(|(x, y)| x < y),
        Dominance::Weak => {
            a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveMember {
    pub x: DVector<f64>,
    pub f: DVector<f64>,
}

/// Members that no other member dominates, in their original order.
pub fn dominance_filter(members: Vec<ArchiveMember>, mode: Dominance) -> Vec<ArchiveMember> {
    let keep: Vec<bool> = members
        .iter()
        .map(|m| {
            !members
                .iter()
                .any(|o| dominates(o.f.as_slice(), m.f.as_slice(), mode))
        })
        .collect();
    members
        .into_iter()
        .zip(keep)
        .filter_map(|(m, k)| k.then_some(m))
        .collect()
}

/// Drops members whose decision vector is within `tol` (max norm) of an
/// earlier member.
pub fn dedup(members: Vec<ArchiveMember>, tol: f64) -> Vec<ArchiveMember> {
    let mut kept: Vec<ArchiveMember> = Vec::with_capacity(members.len());
    for m in members {
        if !kept.iter().any(|k| (&k.x - &m.x).amax() <= tol) {
            kept.push(m);
        }
    }
    kept
}

/// Removes the most crowded members (smallest nearest-neighbour distance in
/// objective space) until at most `cap` remain.
pub fn thin(mut members: Vec<ArchiveMember>, cap: usize) -> Vec<ArchiveMember> {
    if members.len() <= cap {
        return members;
    }
    let dist = |a: &ArchiveMember, b: &ArchiveMember| (&a.f - &b.f).norm();
    let nearest = |ms: &[ArchiveMember], i: usize| {
        (0..ms.len())
            .filter(|&j| j != i)
            .map(|j| (dist(&ms[i], &ms[j]), j))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap_or((f64::INFINITY, i))
    };
    let mut nn: Vec<(f64, usize)> = (0..members.len()).map(|i| nearest(&members, i)).collect();
    while members.len() > cap {
        let drop = (0..members.len())
            .min_by(|&a, &b| nn[a].0.total_cmp(&nn[b].0).then(b.cmp(&a)))
            .unwrap_or(0);
        members.remove(drop);
        nn.remove(drop);
        let stale: Vec<bool> = nn.iter().map(|e| e.1 == drop).collect();
        for entry in nn.iter_mut() {
            if entry.1 > drop {
                entry.1 -= 1;
            }
        }
        for (i, s) in stale.into_iter().enumerate() {
            if s {
                nn[i] = nearest(&members, i);
            }
        }
    }
    members
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontConfig {
    /// Trust-region restarts per point.
    pub n_p: usize,
    /// Iterations per restart.
    pub n_q: usize,
    /// Perturbations per member.
    pub n_r: usize,
    /// Per-coordinate `(low, high)` box for the initial points.
    pub init_box: Vec<(f64, f64)>,
    pub init_count: usize,
    pub perturb_scale: f64,
    pub rounds: usize,
    pub dominance: Dominance,
    pub dedup_tol: f64,
    pub archive_cap: usize,
}

impl Default for FrontConfig {
    fn default() -> Self {
        Self {
            n_p: 1,
            n_q: 20,
            n_r: 2,
            init_box: Vec::new(),
            init_count: 20,
            perturb_scale: 0.5,
            rounds: 5,
            dominance: Dominance::Strict,
            dedup_tol: 1e-12,
            archive_cap: 2000,
        }
    }
}

impl FrontConfig {
    pub fn with_box(init_box: Vec<(f64, f64)>) -> Self {
        Self {
            init_box,
            ..Self::default()
        }
    }

    pub fn validate(&self, dimension: usize) -> std::result::Result<(), ConfigError> {
        for (field, v) in [
            ("n_p", self.n_p),
            ("n_q", self.n_q),
            ("n_r", self.n_r),
            ("init_count", self.init_count),
            ("rounds", self.rounds),
            ("archive_cap", self.archive_cap),
        ] {
            if v == 0 {
                return Err(ConfigError::invalid(field, "must be at least 1"));
            }
        }
        if !(self.perturb_scale > 0.0 && self.perturb_scale.is_finite()) {
            return Err(ConfigError::invalid("perturb_scale", "must be positive"));
        }
        if !(self.dedup_tol >= 0.0) {
            return Err(ConfigError::invalid("dedup_tol", "must be nonnegative"));
        }
        if self.init_box.len() != dimension {
            return Err(ConfigError::invalid(
                "init_box",
                format!("has {} intervals for dimension {dimension}", self.init_box.len()),
            ));
        }
        if let Some((lo, hi)) = self
            .init_box
            .iter()
            .find(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(ConfigError::invalid(
                "init_box",
                format!("[{lo}, {hi}] is not a finite interval"),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParetoArchive {
    members: Vec<ArchiveMember>,
}

impl ParetoArchive {
    /// Filters, deduplicates and thins `candidates` into an archive.
    pub fn from_candidates(candidates: Vec<ArchiveMember>, config: &FrontConfig) -> Self {
        let members = dedup(candidates, config.dedup_tol);
        let members = dominance_filter(members, config.dominance);
        Self {
            members: thin(members, config.archive_cap),
        }
    }

    pub fn members(&self) -> &[ArchiveMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Ordered pairs `(a, b)` with `a` dominating `b`.
    pub fn violations(&self, mode: Dominance) -> usize {
        self.members
            .iter()
            .map(|a| {
                self.members
                    .iter()
                    .filter(|b| dominates(a.f.as_slice(), b.f.as_slice(), mode))
                    .count()
            })
            .sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        if let Some(first) = self.members.first() {
            let header: Vec<String> = (1..=first.x.len())
                .map(|i| format!("x_{i}"))
                .chain((1..=first.f.len()).map(|i| format!("f_{i}")))
                .collect();
            w.write_record(&header)?;
        }
        for m in &self.members {
            w.write_record(m.x.iter().chain(m.f.iter()).map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(file).map_err(|e| Error::Output {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn exact_member<O: Oracle + ?Sized>(oracle: &O, x: DVector<f64>) -> std::result::Result<ArchiveMember, OracleError> {
    if !oracle.spec().exact_available {
        return Err(OracleError::ExactUnavailable);
    }
    let e = oracle.exact_evaluate(&x)?;
    Ok(ArchiveMember { x, f: e.values })
}

/// `init_count` uniform points of the box, evaluated and filtered.
pub fn init_front<O: Oracle + ?Sized>(
    config: &FrontConfig,
    oracle: &O,
    rng: &mut RngStream,
) -> Result<ParetoArchive> {
    config.validate(oracle.spec().dimension)?;
    let mut candidates = Vec::with_capacity(config.init_count);
    for _ in 0..config.init_count {
        let x = DVector::from_iterator(
            config.init_box.len(),
            config
                .init_box
                .iter()
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()),
        );
        match exact_member(oracle, x) {
            Ok(m) => candidates.push(m),
            Err(e) => warn!("initial point skipped: {e}"),
        }
    }
    Ok(ParetoArchive::from_candidates(candidates, config))
}

/// Counts from one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    /// Candidates before filtering, including the retained members.
    pub candidates: usize,
    /// Points dropped because evaluation or a restart failed.
    pub failures: usize,
    pub archive_size: usize,
}

/// One round: perturb every member, restart the solver from every member and
/// perturbation, and filter the union with the old archive.
pub fn front_round<O: Oracle + ?Sized>(
    archive: &ParetoArchive,
    oracle: &O,
    front: &FrontConfig,
    solver_config: &SolverConfig,
    rng: &mut RngStream,
) -> Result<(ParetoArchive, RoundStats)> {
    let spec = oracle.spec();
    front.validate(spec.dimension)?;
    solver_config.validate()?;
    if archive.is_empty() {
        return Err(ConfigError::invalid("archive", "front rounds need a non-empty archive").into());
    }
    let mut stats = RoundStats::default();
    let mut candidates: Vec<ArchiveMember> = archive.members.clone();
    let mut starts: Vec<DVector<f64>> = Vec::new();
    for m in &archive.members {
        starts.push(m.x.clone());
        for _ in 0..front.n_r {
            let xi = DVector::from_iterator(
                m.x.len(),
                (0..m.x.len()).map(|_| StandardNormal.sample(rng)),
            );
            let p: DVector<f64> = &m.x + xi * front.perturb_scale;
            match exact_member(oracle, p.clone()) {
                Ok(member) => {
                    candidates.push(member);
                    starts.push(p);
                }
                Err(e) => {
                    warn!("perturbed point skipped: {e}");
                    stats.failures += 1;
                }
            }
        }
    }
    let jobs: Vec<(DVector<f64>, u64)> = starts
        .iter()
        .flat_map(|x| (0..front.n_p).map(move |_| x.clone()))
        .map(|x| (x, rng.next_u64() >> 1))
        .collect();
    let results: Vec<std::result::Result<ArchiveMember, String>> = jobs
        .into_par_iter()
        .map(|(x, seed)| {
            let cfg = SolverConfig {
                k_max: front.n_q,
                seed,
                exact_metrics: false,
                ..solver_config.clone()
            };
            let x0 = DecisionVector::new(x).map_err(|e| e.to_string())?;
            let out = solver::run(oracle, &cfg, x0).map_err(|e| e.to_string())?;
            exact_member(oracle, out.final_x).map_err(|e| e.to_string())
        })
        .collect();
    for r in results {
        match r {
            Ok(m) => candidates.push(m),
            Err(e) => {
                warn!("restart skipped: {e}");
                stats.failures += 1;
            }
        }
    }
    stats.candidates = candidates.len();
    let next = ParetoArchive::from_candidates(candidates, front);
    stats.archive_size = next.len();
    Ok((next, stats))
}

#[derive(Clone, Debug)]
pub struct FrontOutput {
    pub archive: ParetoArchive,
    pub rounds: Vec<RoundStats>,
}

/// Initial front followed by `front.rounds` rounds, all driven by one seed.
pub fn run_front<O: Oracle + ?Sized>(
    oracle: &O,
    front: &FrontConfig,
    solver_config: &SolverConfig,
    seed: u64,
) -> Result<FrontOutput> {
    let mut rng = RngStream::new(seed, FRONT_STREAM);
    let mut archive = init_front(front, oracle, &mut rng)?;
    let mut rounds = Vec::with_capacity(front.rounds);
    for _ in 0..front.rounds {
        let (next, stats) = front_round(&archive, oracle, front, solver_config, &mut rng)?;
        archive = next;
        rounds.push(stats);
    }
    Ok(FrontOutput { archive, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{test1_front_distance, AnalyticProblem};

    fn member(x: &[f64], f: &[f64]) -> ArchiveMember {
        ArchiveMember {
            x: DVector::from_column_slice(x),
            f: DVector::from_column_slice(f),
        }
    }

    fn fs(ms: &[ArchiveMember]) -> Vec<Vec<f64>> {
        ms.iter().map(|m| m.f.iter().copied().collect()).collect()
    }

    #[test]
    fn strict_filter_examples() {
        let ms = vec![member(&[0.0], &[1.0, 1.0]), member(&[1.0], &[2.0, 2.0]), member(&[2.0], &[1.0, 3.0])];
        assert_eq!(fs(&dominance_filter(ms, Dominance::Strict)), vec![vec![1.0, 1.0], vec![1.0, 3.0]]);
        let ms = vec![member(&[0.0], &[1.0, 2.0]), member(&[1.0], &[2.0, 1.0])];
        assert_eq!(dominance_filter(ms.clone(), Dominance::Strict), ms);
        let ms = vec![member(&[0.0], &[0.0, 0.0]), member(&[1.0], &[0.0, 1.0])];
        assert_eq!(dominance_filter(ms.clone(), Dominance::Strict).len(), 2);
        assert_eq!(fs(&dominance_filter(ms, Dominance::Weak)), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn dedup_merges_identical_points() {
        let ms = vec![member(&[1.0, 1.0], &[2.0, 32.0]), member(&[1.0, 1.0], &[2.0, 32.0]), member(&[1.0, 1.0 + 1e-13], &[2.0, 32.0])];
        assert_eq!(dedup(ms, 1e-12).len(), 1);
    }

    #[test]
    fn thinning_drops_crowded_points() {
        let ms = vec![
            member(&[0.0], &[0.0, 10.0]),
            member(&[1.0], &[5.0, 5.0]),
            member(&[2.0], &[5.1, 4.9]),
            member(&[3.0], &[10.0, 0.0]),
        ];
        let kept = thin(ms, 3);
        assert_eq!(kept.len(), 3);
        assert_eq!(kept[0].x[0], 0.0);
        assert_eq!(kept[2].x[0], 3.0);
    }

    #[test]
    fn config_validation() {
        let ok = FrontConfig::with_box(vec![(-1.0, 6.0), (-1.0, 6.0)]);
        assert!(ok.validate(2).is_ok());
        assert!(ok.validate(3).is_err());
        let zero_q = FrontConfig { n_q: 0, ..ok.clone() };
        assert!(matches!(zero_q.validate(2), Err(ConfigError::Invalid { field, .. }) if field == "n_q"));
        let reversed = FrontConfig::with_box(vec![(1.0, 0.0), (0.0, 1.0)]);
        assert!(reversed.validate(2).is_err());
        let degenerate = FrontConfig::with_box(vec![(1.0, 1.0), (2.0, 2.0)]);
        assert!(degenerate.validate(2).is_ok());
    }

    #[test]
    fn init_front_sizes() {
        let mut rng = RngStream::new(1, FRONT_STREAM);
        let one = FrontConfig {
            init_count: 1,
            ..FrontConfig::with_box(vec![(-1.0, 6.0), (-1.0, 6.0)])
        };
        assert_eq!(init_front(&one, &AnalyticProblem::Test1, &mut rng).unwrap().len(), 1);
        let same = FrontConfig {
            init_count: 10,
            ..FrontConfig::with_box(vec![(1.0, 1.0), (2.0, 2.0)])
        };
        assert_eq!(init_front(&same, &AnalyticProblem::Test1, &mut rng).unwrap().len(), 1);
        let many = FrontConfig {
            init_count: 100,
            ..FrontConfig::with_box(vec![(-1.0, 6.0), (-1.0, 6.0)])
        };
        let a = init_front(&many, &AnalyticProblem::Test1, &mut rng).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a.violations(Dominance::Strict), 0);
    }

    #[test]
    fn round_candidate_count() {
        let front = FrontConfig {
            n_r: 2,
            n_p: 1,
            ..FrontConfig::with_box(vec![(0.0, 5.0), (0.0, 5.0)])
        };
        let archive = ParetoArchive::from_candidates(vec![member(&[1.0, 1.0], &[2.0, 32.0])], &front);
        let mut rng = RngStream::new(3, FRONT_STREAM);
        let (_, stats) = front_round(&archive, &AnalyticProblem::Test1, &front, &SolverConfig::default(), &mut rng).unwrap();
        assert_eq!(stats.candidates, 6);
        assert_eq!(stats.failures, 0);
    }

    #[test]
    fn rounds_stay_on_the_test1_segment() {
        let front = FrontConfig {
            rounds: 2,
            ..FrontConfig::with_box(vec![(0.0, 5.0), (0.0, 5.0)])
        };
        let seeded: Vec<ArchiveMember> = (0..6)
            .map(|i| {
                let t = i as f64;
                let x = DVector::from_column_slice(&[t, t]);
                let f = AnalyticProblem::Test1.exact(&x).unwrap().values;
                ArchiveMember { x, f }
            })
            .collect();
        let mut archive = ParetoArchive::from_candidates(seeded, &front);
        let mut rng = RngStream::new(5, FRONT_STREAM);
        let solver_config = SolverConfig::default();
        for _ in 0..front.rounds {
            let previous = archive.clone();
            archive = front_round(&archive, &AnalyticProblem::Test1, &front, &solver_config, &mut rng).unwrap().0;
            assert_eq!(archive.violations(Dominance::Strict), 0);
            for m in archive.members() {
                assert!(!previous.members().iter().any(|p| dominates(p.f.as_slice(), m.f.as_slice(), Dominance::Strict)));
            }
        }
        for m in archive.members() {
            assert!(test1_front_distance(m.f.as_slice()) < 0.1, "{:?}", m.f);
            assert!((m.x[0] - m.x[1]).abs() < 0.05, "{:?}", m.x);
        }
    }

    #[test]
    fn csv_export() {
        let front = FrontConfig::with_box(vec![(0.0, 1.0)]);
        let a = ParetoArchive::from_candidates(vec![member(&[0.5], &[1.0, 2.0]), member(&[1.5], &[2.0, 1.0])], &front);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x_1,f_1,f_2\n0.5,1.0,2.0\n1.5,2.0,1.0\n");
    }

    #[test]
    fn dominance_parses() {
        assert_eq!("weak".parse::<Dominance>().unwrap(), Dominance::Weak);
        assert!("pareto".parse::<Dominance>().is_err());
    }
}
