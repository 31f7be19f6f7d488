//! End-to-end acceptance checks, one line of output per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;

use smop::harness::{run_experiment, write_csv, ExperimentSpec};
use smop::marginal::{brute_force_marginal, solve_marginal_q2_closed_form};
use smop::oracles::sampling::{required_sample_size, SampleKind};
use smop::oracles::{
    test1_front_distance, AnalyticProblem, FiniteSumProblem, FullBatch, NoiseSpec, NoisyProblem,
};
use smop::pareto::{front_round, init_front, Dominance, FrontConfig};
use smop::{
    run, solve_marginal, DecisionVector, HessianMode, IterationRecord, RngStream, SolverConfig,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn random_vector(rng: &mut RngStream, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn start(x: &[f64]) -> DecisionVector {
    DecisionVector::from_slice(x).unwrap()
}

fn test1_config(seed: u64) -> SolverConfig {
    SolverConfig {
        k_max: 500,
        theta: 1e-4,
        gamma1: 0.5,
        gamma2: 2.0,
        eta1: 1e-4,
        seed,
        ..Default::default()
    }
}

fn test2_config(seed: u64) -> SolverConfig {
    SolverConfig {
        k_max: 500,
        theta: 0.4,
        eta1: 0.4,
        seed,
        ..Default::default()
    }
}

/// Runs of the criteria below, kept for the sufficient-decrease audit.
fn audit_runs() -> Vec<Vec<IterationRecord>> {
    let mut runs = Vec::new();
    let t1 = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::gaussian(0.1)).unwrap();
    let t2 = NoisyProblem::new(AnalyticProblem::Test2, NoiseSpec::gaussian(0.01)).unwrap();
    let b1 = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::bounded(0.5, 1.0, 1.0)).unwrap();
    let logistic = FiniteSumProblem::synthetic(300, 10, 0.1, 7).unwrap();
    for seed in 0..10 {
        runs.push(run(&t1, &test1_config(seed), start(&[9.0, 9.0])).unwrap().records);
        runs.push(run(&t2, &test2_config(seed), start(&[-0.5, 1.0])).unwrap().records);
        runs.push(run(&b1, &test1_config(seed), start(&[9.0, 9.0])).unwrap().records);
    }
    for mode in [HessianMode::Zero, HessianMode::Subsampled] {
        for seed in 0..3 {
            let cfg = logistic_config(mode, seed);
            runs.push(run(&logistic, &cfg, start(&[0.0; 11])).unwrap().records);
        }
    }
    runs
}

fn logistic_config(mode: HessianMode, seed: u64) -> SolverConfig {
    SolverConfig {
        k_max: 151,
        theta: 0.1,
        hessian_mode: mode,
        seed,
        ..Default::default()
    }
}

fn marginal_duality() -> Outcome {
    let t = Instant::now();
    let mut rng = RngStream::new(11, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let q = rng.random_range(1..=4);
        let grads: Vec<_> = (0..q).map(|_| random_vector(&mut rng, n)).collect();
        let exact = solve_marginal(&grads, 1e-10).map_err(|e| e.to_string())?.omega;
        let sampled = brute_force_marginal(&grads, 100_000).map_err(|e| e.to_string())?;
        worst = worst.max((exact - sampled).abs());
    }
    let mut worst_q2 = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=5);
        let g1 = random_vector(&mut rng, n);
        let g2 = random_vector(&mut rng, n);
        let closed = solve_marginal_q2_closed_form(&g1, &g2).map_err(|e| e.to_string())?;
        let general = solve_marginal(&[g1, g2], 1e-12).map_err(|e| e.to_string())?;
        worst_q2 = worst_q2.max((closed.omega - general.omega).abs());
    }
    let elapsed = t.elapsed();
    check(
        worst <= 2e-2 && worst_q2 <= 1e-10 && within(elapsed, 30),
        format!("max |omega - sampled| {worst:.2e}, max q=2 gap {worst_q2:.2e}, {elapsed:.1?}"),
    )
}

fn single_objective() -> Outcome {
    let mut rng = RngStream::new(12, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=6);
        let g = random_vector(&mut rng, n);
        let sol = solve_marginal(std::slice::from_ref(&g), 1e-10).map_err(|e| e.to_string())?;
        let dir_err = (&sol.direction + &g / g.norm()).amax();
        worst = worst.max((sol.omega - g.norm()).abs()).max(dir_err);
    }
    check(worst <= 1e-12, format!("max error {worst:.2e}"))
}

fn sufficient_decrease(runs: &[Vec<IterationRecord>]) -> Outcome {
    let mut checked = 0usize;
    let mut violations = 0usize;
    for r in runs.iter().flatten() {
        let bound = 0.5 * r.omega_m * r.delta.min(r.omega_m / r.beta);
        checked += 1;
        if r.predicted_reduction < bound - 1e-12 {
            violations += 1;
        }
    }
    check(violations == 0, format!("{violations} violations in {checked} iterations"))
}

fn marginal_bound() -> Outcome {
    let oracle = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::bounded(0.5, 1.0, 1.0))
        .map_err(|e| e.to_string())?;
    let out = run(&oracle, &test1_config(4), start(&[9.0, 9.0])).map_err(|e| e.to_string())?;
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in &out.records {
        let gap = (r.omega_true.unwrap() - r.omega_m).abs();
        worst = worst.max(gap / r.delta);
        if gap > r.delta {
            violations += 1;
        }
    }
    check(
        violations == 0 && out.records.len() == 500,
        format!("{violations} violations over {} iterations, max gap/delta {worst:.3}", out.records.len()),
    )
}

fn distance_to_segment(x: &DVector<f64>) -> f64 {
    let t = ((x[0] + x[1]) / 2.0).clamp(0.0, 5.0);
    ((x[0] - t).powi(2) + (x[1] - t).powi(2)).sqrt()
}

fn test1_reproduction() -> Outcome {
    let t = Instant::now();
    let oracle = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::gaussian(0.1))
        .map_err(|e| e.to_string())?;
    let mut good = 0;
    let mut omegas = Vec::new();
    for seed in 0..10 {
        let out = run(&oracle, &test1_config(seed), start(&[9.0, 9.0])).map_err(|e| e.to_string())?;
        let omega = smop::harness::exact_omega(&oracle, &out.final_x);
        if omega <= 0.5 && distance_to_segment(&out.final_x) <= 0.5 {
            good += 1;
        }
        omegas.push(omega);
    }
    let elapsed = t.elapsed();
    check(
        good >= 9 && within(elapsed, 10),
        format!("{good}/10 runs near the Pareto set, median omega {:.2e}, {elapsed:.1?}", median(omegas)),
    )
}

fn test2_reproduction() -> Outcome {
    let t = Instant::now();
    let oracle = NoisyProblem::new(AnalyticProblem::Test2, NoiseSpec::gaussian(0.01))
        .map_err(|e| e.to_string())?;
    let mut good = 0;
    for seed in 0..10 {
        let out = run(&oracle, &test2_config(seed), start(&[-0.5, 1.0])).map_err(|e| e.to_string())?;
        if smop::harness::exact_omega(&oracle, &out.final_x) <= 0.1 {
            good += 1;
        }
    }
    let elapsed = t.elapsed();
    check(good >= 8 && within(elapsed, 10), format!("{good}/10 runs with omega <= 0.1, {elapsed:.1?}"))
}

fn sample_sizes() -> Outcome {
    let n = required_sample_size(SampleKind::Value, 1.0, 0.5, 0.5f64.sqrt(), usize::MAX);
    let mut rng = RngStream::new(13, 0);
    let mut failures = 0;
    for _ in 0..1000 {
        let bound = rng.random_range(0.1..10.0);
        let delta = rng.random_range(0.01..5.0);
        let alpha = rng.random_range(0.01..0.99);
        let smaller_delta = delta * rng.random_range(0.1..1.0);
        let larger_alpha = alpha + (0.999 - alpha) * rng.random::<f64>();
        for kind in [SampleKind::Value, SampleKind::Gradient] {
            let base = required_sample_size(kind, bound, delta, alpha, usize::MAX);
            if required_sample_size(kind, bound, smaller_delta, alpha, usize::MAX) < base
                || required_sample_size(kind, bound, delta, larger_alpha, usize::MAX) < base
            {
                failures += 1;
            }
        }
    }
    check(n == 274 && failures == 0, format!("size {n}, {failures} monotonicity failures"))
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn derivative_consistency() -> Outcome {
    let p = FiniteSumProblem::synthetic(300, 10, 0.1, 7).map_err(|e| e.to_string())?;
    let n = p.dimension();
    let mut rng = RngStream::new(14, 0);
    let (mut worst_g, mut worst_h) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let x = random_vector(&mut rng, n);
        let group = rng.random_range(0..2);
        let size = p.groups()[group].len();
        let k = rng.random_range(1..=size);
        let rows: Vec<usize> = rand::seq::index::sample(&mut rng, size, k)
            .into_iter()
            .map(|i| p.groups()[group][i])
            .collect();
        let at = p.group_loss(group, &rows, &x, true);
        let hessian = at.hessian.unwrap();
        let h = 1e-5;
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = h;
            let plus = p.group_loss(group, &rows, &(&x + &e), false);
            let minus = p.group_loss(group, &rows, &(&x - &e), false);
            let fd = (plus.value - minus.value) / (2.0 * h);
            worst_g = worst_g.max(relative(at.gradient[j], fd));
            let fd_col = (&plus.gradient - &minus.gradient) / (2.0 * h);
            for i in 0..n {
                worst_h = worst_h.max(relative(hessian[(i, j)], fd_col[i]));
            }
        }
    }
    check(
        worst_g <= 1e-5 && worst_h <= 1e-4,
        format!("max relative gradient error {worst_g:.2e}, Hessian {worst_h:.2e}"),
    )
}

fn first_hit(records: &[IterationRecord], threshold: f64) -> Option<u64> {
    records
        .iter()
        .find(|r| r.omega_true.unwrap() <= threshold)
        .map(|r| r.cost_so_far)
}

fn logistic_regression() -> Outcome {
    let t = Instant::now();
    let p = FiniteSumProblem::synthetic(300, 10, 0.1, 7).map_err(|e| e.to_string())?;
    let x0 = start(&vec![0.0; p.dimension()]);
    let mut ok = true;
    let mut details = Vec::new();
    for mode in [HessianMode::Zero, HessianMode::Subsampled] {
        let dmop = run(&FullBatch(&p), &logistic_config(mode, 0), x0.clone()).map_err(|e| e.to_string())?;
        let omega0 = dmop.records[0].omega_true.unwrap();
        let threshold = 0.1 * omega0;
        let dmop_cost = first_hit(&dmop.records, threshold).unwrap_or(u64::MAX);
        let mut ratios = Vec::new();
        let mut costs = Vec::new();
        for seed in 0..5 {
            let out = run(&p, &logistic_config(mode, seed), x0.clone()).map_err(|e| e.to_string())?;
            ratios.push(out.records[150].omega_true.unwrap() / omega0);
            costs.push(first_hit(&out.records, threshold).map_or(f64::INFINITY, |c| c as f64));
        }
        let (ratio, cost) = (median(ratios), median(costs));
        ok &= ratio <= 0.1 && cost < dmop_cost as f64;
        details.push(format!(
            "{mode:?}: median omega ratio {ratio:.1e}, median cost {cost} vs deterministic {dmop_cost}"
        ));
    }
    let elapsed = t.elapsed();
    check(ok && within(elapsed, 120), format!("{}, {elapsed:.1?}", details.join("; ")))
}

fn pareto_archive() -> Outcome {
    let t = Instant::now();
    let oracle = NoisyProblem::new(AnalyticProblem::Test1, NoiseSpec::gaussian(0.1))
        .map_err(|e| e.to_string())?;
    let front = FrontConfig::with_box(vec![(-1.0, 6.0); 2]);
    let solver = SolverConfig::default();
    let mut rng = RngStream::new(0, 1 << 32);
    let mut archive = init_front(&front, &oracle, &mut rng).map_err(|e| e.to_string())?;
    let mut violations = archive.violations(Dominance::Strict);
    for _ in 0..front.rounds {
        archive = front_round(&archive, &oracle, &front, &solver, &mut rng)
            .map_err(|e| e.to_string())?
            .0;
        violations += archive.violations(Dominance::Strict);
    }
    let close = archive
        .members()
        .iter()
        .filter(|m| test1_front_distance(m.f.as_slice()) <= 0.1)
        .count();
    let elapsed = t.elapsed();
    check(
        violations == 0 && close >= 50 && within(elapsed, 60),
        format!("{close}/{} points within 0.1 of the front, {violations} violations, {elapsed:.1?}", archive.len()),
    )
}

fn csv_bytes(text: &str) -> Result<Vec<u8>, String> {
    let spec = ExperimentSpec::from_kv_str(text).map_err(|e| e.to_string())?;
    let result = run_experiment(&spec).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    write_csv(&result.rows, &mut out).map_err(|e| e.to_string())?;
    Ok(out)
}

fn determinism() -> Outcome {
    let specs = [
        "problem = \"test1\"\nsigma = 0.1\nk_max = 200\nnum_simulations = 4\nseed = 3\n",
        "problem = \"synthetic\"\nhessian_mode = \"subsampled\"\nk_max = 40\nnum_simulations = 3\nseed = 9\n",
    ];
    let mut identical = 0;
    for text in specs {
        let first = csv_bytes(text)?;
        let second = csv_bytes(text)?;
        if first == second && !first.is_empty() {
            identical += 1;
        }
    }
    check(identical == specs.len(), format!("{identical}/{} experiments byte-identical", specs.len()))
}

fn main() -> ExitCode {
    let audit = audit_runs();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("marginal duality and closed form", Box::new(marginal_duality)),
        ("single-objective reduction", Box::new(single_objective)),
        ("sufficient decrease", Box::new(|| sufficient_decrease(&audit))),
        ("fully linear marginal bound", Box::new(marginal_bound)),
        ("test 1 reproduction", Box::new(test1_reproduction)),
        ("test 2 reproduction", Box::new(test2_reproduction)),
        ("subsample-size formula", Box::new(sample_sizes)),
        ("gradient and Hessian consistency", Box::new(derivative_consistency)),
        ("logistic regression", Box::new(logistic_regression)),
        ("pareto archive", Box::new(pareto_archive)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(criterion))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
