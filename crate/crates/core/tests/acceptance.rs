//! Exit criteria for the crate. Each test prints one `[PASS]`/`[FAIL]` line.
//!
//! Run with `cargo test -p kabc-core --test acceptance -- --nocapture --test-threads 1`
//! to see the lines in order.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use kabc_core::environment::{ArmSpec, Bandit, Environment};
use kabc_core::harness::{load_config, run_trials, ExperimentConfig, Variant};
use kabc_core::kabc::{budget_bound, kabc, round_confidence, run_nonadaptive, schedule, KabcParams, StopReason};
use kabc_core::statistics::{empirical_mmd, empirical_variance, oracle_deviation_bound, threshold};
use kabc_core::{cluster, KernelSpec, Partition, SampleBatch, StreamSeed, ThresholdMode};
use rand::Rng;

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id}: {name} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn within(id: u32, start: Instant, limit: Duration) {
    let elapsed = start.elapsed();
    assert!(elapsed < limit, "criterion {id} took {elapsed:?}, limit {limit:?}");
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    load_config(&path).unwrap()
}

fn sigma(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

fn rbf() -> KernelSpec {
    KernelSpec::gaussian(1.0, 1).unwrap()
}

fn diracs(points: &[f64]) -> Environment {
    Environment::new(points.iter().map(|&x| ArmSpec::point_mass(vec![x])).collect(), rbf()).unwrap()
}

/// Plain double sums over the raw points, written independently of the library.
fn reference_stats(k: &KernelSpec, a: &[Vec<f64>], b: &[Vec<f64>]) -> (f64, Option<f64>) {
    let n = a.len() as f64;
    let g = |x: &[f64], y: &[f64]| k.evaluate(x, y).unwrap();
    let mut sq = 0.0;
    for s in 0..a.len() {
        for t in 0..a.len() {
            sq += g(&a[s], &a[t]) - 2.0 * g(&a[s], &b[t]) + g(&b[s], &b[t]);
        }
    }
    let var = (a.len() >= 2).then(|| {
        let mut v = 0.0;
        for t in 0..a.len() {
            let inner: f64 = a.iter().map(|x| g(&a[t], x)).sum();
            v += g(&a[t], &a[t]) - inner / n;
        }
        (v / (n - 1.0)).max(0.0)
    });
    ((sq / (n * n)).max(0.0).sqrt(), var)
}

#[test]
fn criterion_01_statistic_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StreamSeed::new(1).rng();
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=6);
        let bw = rng.gen_range(0.3..3.0);
        let k = if case % 2 == 0 {
            KernelSpec::gaussian(bw, d).unwrap()
        } else {
            KernelSpec::laplacian(bw, d).unwrap()
        };
        let mut draw = || -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
        };
        let (a, b) = (draw(), draw());
        let (mmd_ref, var_ref) = reference_stats(&k, &a, &b);
        let (ba, bb) = (SampleBatch::new(0, &a).unwrap(), SampleBatch::new(1, &b).unwrap());
        worst = worst.max((empirical_mmd(&k, &ba, &bb).unwrap() - mmd_ref).abs());
        if let Some(v) = var_ref {
            worst = worst.max((empirical_variance(&k, &ba).unwrap() - v).abs());
        }
    }
    within(1, start, Duration::from_secs(10));
    verdict(1, "statistic oracle equivalence", worst <= 1e-12, format!("max |diff| = {worst:e} over 1000 batches"));
}

#[test]
fn criterion_02_deterministic_cluster_cases() {
    let start = Instant::now();
    let mmd = (2.0 - 2.0 * (-1.0f64).exp()).sqrt();
    let mut ok = true;

    let t = cluster(&diracs(&[0.0, 0.0]), 2, 0.1, ThresholdMode::VarianceAware, StreamSeed::new(1)).unwrap();
    ok &= t.partition == Partition::from_blocks(vec![vec![0, 1]]).unwrap();
    ok &= t.pairs[0].stats.mmd_hat == 0.0;

    let t = cluster(&diracs(&[0.0, 1.0]), 200, 0.1, ThresholdMode::VarianceAware, StreamSeed::new(2)).unwrap();
    ok &= t.partition == Partition::from_blocks(vec![vec![0], vec![1]]).unwrap();
    ok &= (t.pairs[0].stats.mmd_hat - 1.1243850).abs() <= 1e-6;
    ok &= (t.pairs[0].stats.mmd_hat - mmd).abs() <= 1e-12;
    ok &= (t.pairs[0].threshold - 0.2707).abs() <= 1e-4;
    ok &= (t.pairs[0].threshold - (32.0 / 3.0) * 160f64.ln() / 200.0).abs() <= 1e-6;

    let t = cluster(&diracs(&[0.0, 0.0, 1.0]), 200, 0.1, ThresholdMode::VarianceAware, StreamSeed::new(3)).unwrap();
    ok &= t.partition == Partition::from_blocks(vec![vec![0, 1], vec![2]]).unwrap();
    let expected_threshold = (32.0 / 3.0) * (8.0 * 6.0 / 0.1f64).ln() / 200.0;
    for pr in &t.pairs {
        ok &= (pr.threshold - expected_threshold).abs() <= 1e-6;
        let expected = if (pr.i, pr.j) == (0, 1) { 0.0 } else { mmd };
        ok &= (pr.stats.mmd_hat - expected).abs() <= 1e-6;
    }
    within(2, start, Duration::from_secs(1));
    verdict(2, "deterministic CLUSTER cases", ok, "three point-mass examples".into());
}

#[test]
fn criterion_03_concentration_coverage() {
    let start = Instant::now();
    const R: usize = 2000;
    let coin = ArmSpec::discrete(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let wide = ArmSpec::discrete(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
    let k = rbf();
    let g_tilde = k.bounds().g_tilde;
    let g_bar = k.bounds().g_bar;
    let n = 64;

    // Empirical threshold, two identical arms.
    let same = Environment::new(vec![coin.clone(), coin.clone()], k).unwrap();
    let (n_arms, delta_prime) = (2usize, 0.2);
    let root = StreamSeed::new(30);
    let mut violations = 0;
    for r in 0..R {
        let s = root.child(r as u64);
        let a = same.sample(0, n, &mut s.child(0).rng()).unwrap();
        let b = same.sample(1, n, &mut s.child(1).rng()).unwrap();
        let m = empirical_mmd(&k, &a, &b).unwrap();
        let thr = threshold(
            n,
            delta_prime,
            n_arms,
            empirical_variance(&k, &a).unwrap(),
            empirical_variance(&k, &b).unwrap(),
            g_tilde,
        )
        .unwrap();
        violations += usize::from(m > thr);
    }
    let level = delta_prime / (n_arms * n_arms - n_arms) as f64;
    let freq_a = violations as f64 / R as f64;
    let limit_a = level + 3.0 * sigma(level, R);

    // Oracle deviation bound, two distinct arms.
    let diff = Environment::new(vec![coin, wide], k).unwrap();
    let true_mmd = diff.true_mmd(0, 1).unwrap().value;
    let (vi, vj) = (diff.true_variance(0).unwrap().value, diff.true_variance(1).unwrap().value);
    let delta = 0.1;
    let bound = oracle_deviation_bound(n, delta, vi, vj, g_bar).unwrap();
    let root = StreamSeed::new(31);
    let mut misses = 0;
    for r in 0..R {
        let s = root.child(r as u64);
        let a = diff.sample(0, n, &mut s.child(0).rng()).unwrap();
        let b = diff.sample(1, n, &mut s.child(1).rng()).unwrap();
        let m = empirical_mmd(&k, &a, &b).unwrap();
        misses += usize::from((m - true_mmd).abs() > bound);
    }
    let freq_b = misses as f64 / R as f64;
    let limit_b = delta + 3.0 * sigma(delta, R);

    within(3, start, Duration::from_secs(120));
    verdict(
        3,
        "concentration coverage",
        freq_a <= limit_a && freq_b <= limit_b,
        format!("empirical threshold {freq_a} <= {limit_a:.4}; oracle bound {freq_b} <= {limit_b:.4}"),
    );
}

#[test]
fn criterion_04_delta_pac() {
    let start = Instant::now();
    let cfg = config("point_masses.toml");
    assert_eq!((cfg.trials, cfg.clusters, cfg.delta), (500, 2, 0.1));
    let report = run_trials(&cfg).unwrap();
    let limit = 0.1 + 3.0 * sigma(0.1, 500);
    within(4, start, Duration::from_secs(300));
    verdict(
        4,
        "delta-PAC",
        report.error_rate <= limit,
        format!("error rate {} <= {limit:.4} over {} trials", report.error_rate, report.trials),
    );
}

#[test]
fn criterion_05_budget_bound() {
    let start = Instant::now();
    let cfg = config("point_masses.toml");
    let report = run_trials(&cfg).unwrap();
    let s2 = report.oracle.s_star_squared.unwrap();
    let bound = budget_bound(3, 0.1, s2).unwrap();
    let frac = report.within_bound_fraction.unwrap();
    let limit = 0.9 - 3.0 * sigma(0.1, 500);

    let two = kabc(&diracs(&[0.0, 1.0]), &KabcParams::new(0.1, 2), StreamSeed::new(5)).unwrap();

    let ok = (s2 - 2.2488).abs() <= 1e-4
        && report.oracle.tau_bound == Some(bound.tau_bound)
        && frac >= limit
        && two.stopped_at == StopReason::Iteration(4)
        && two.budget == 526;
    within(5, start, Duration::from_secs(300));
    verdict(
        5,
        "budget bound",
        ok,
        format!(
            "P(tau <= {:.1}) = {frac} >= {limit:.4}; two-arm run stopped at {} with tau = {}",
            bound.tau_bound, two.stopped_at, two.budget
        ),
    );
}

#[test]
fn criterion_06_nonadaptive_variant() {
    let start = Instant::now();
    let mut cfg = config("point_masses.toml");
    let s2 = cfg.environment.signal_to_noise().unwrap();
    let root = StreamSeed::new(6);
    let trials = 500;
    let correct = (0..trials)
        .filter(|&t| {
            let trace = run_nonadaptive(&cfg.environment, 0.1, s2, ThresholdMode::VarianceAware, root.child(t)).unwrap();
            trace.partition == *cfg.environment.true_partition()
        })
        .count();
    // The harness path must agree.
    cfg.variant = Variant::Nonadaptive { s0_squared: s2 };
    let harness = run_trials(&cfg).unwrap();
    let freq = correct as f64 / trials as f64;
    let limit = 1.0 - 0.1 - 3.0 * sigma(0.1, trials as usize);
    within(6, start, Duration::from_secs(120));
    verdict(
        6,
        "non-adaptive variant",
        freq >= limit && 1.0 - harness.error_rate >= limit,
        format!("correct frequency {freq} (harness {}) >= {limit:.4}", 1.0 - harness.error_rate),
    );
}

#[test]
fn criterion_07_schedule_arithmetic() {
    let start = Instant::now();
    let n1 = schedule(1, 0.1, 2).unwrap().n_k;
    let n2 = schedule(2, 0.1, 2).unwrap().n_k;

    // δ_k = δ/(4k²). For k ≥ 2, 1/k² < 1/(k−1) − 1/k because k(k−1) < k², and the
    // right-hand side telescopes, so Σ_{k≤K} 1/k² < 2 − 1/K < 4, i.e. Σ δ_k < δ.
    let terms: u64 = 10_000;
    let termwise = (2..=terms).all(|k| k * (k - 1) < k * k);
    let delta = 0.1;
    let mut partial = 0.0;
    let mut bounded = true;
    for k in 1..=terms as u32 {
        partial += round_confidence(k, delta).unwrap();
        bounded &= partial <= delta * std::f64::consts::PI.powi(2) / 24.0 && partial < delta;
    }
    within(7, start, Duration::from_secs(1));
    verdict(
        7,
        "schedule arithmetic",
        n1 == 13 && n2 == 32 && termwise && bounded,
        format!("n_1 = {n1}, n_2 = {n2}, sum of first {terms} delta_k = {partial:.6} < {delta}"),
    );
}

#[test]
fn criterion_08_variance_aware_beats_subgaussian() {
    let cfg = config("low_variance.toml");
    let env = &cfg.environment;
    let v = env.true_variance(0).unwrap().value.max(env.true_variance(1).unwrap().value);
    assert!((v - 0.01).abs() < 5e-4, "V* = {v}");
    let root = StreamSeed::new(cfg.seed);
    let mut va = Vec::new();
    let mut sg = Vec::new();
    for t in 0..200 {
        let seed = root.child(t);
        for (mode, out) in [(ThresholdMode::VarianceAware, &mut va), (ThresholdMode::Subgaussian, &mut sg)] {
            let r = kabc(env, &KabcParams::new(cfg.delta, 2).with_mode(mode), seed).unwrap();
            out.push(r.budget);
        }
    }
    let median = |v: &mut Vec<u64>| {
        v.sort_unstable();
        v[(v.len() + 1) / 2 - 1]
    };
    let (m_va, m_sg) = (median(&mut va), median(&mut sg));
    verdict(
        8,
        "variance-aware vs sub-Gaussian",
        m_va < m_sg,
        format!("median budget {m_va} (variance-aware) < {m_sg} (sub-Gaussian) over 200 paired seeds"),
    );
}

#[test]
fn criterion_09_end_to_end_determinism() {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join("mixed_2d.toml");
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_kabc"))
            .args(["montecarlo", "--config"])
            .arg(&config)
            .args(["--seed", "424242", "--format", "csv", "--workers", workers, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let first = run("a.csv", "1");
    let second = run("b.csv", "2");
    verdict(
        9,
        "end-to-end determinism",
        first == second && !first.is_empty(),
        format!("{} bytes, identical = {}", first.len(), first == second),
    );
}
