//! Monte Carlo driver: many independent seeded runs of one experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::Bandit;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Variant};
use crate::kabc::{budget_bound, kabc, run_nonadaptive, KabcParams, RunReport, StopReason};
use crate::seed::StreamSeed;
use crate::statistics::ThresholdMode;

/// Seed of trial `trial` under root seed `root`.
pub fn trial_seed(root: u64, trial: u64) -> StreamSeed {
    StreamSeed::new(root).child(trial)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialDigest {
    pub trial: u64,
    pub seed: u64,
    pub report: RunReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetQuantiles {
    pub min: u64,
    pub median: u64,
    pub p90: u64,
    pub max: u64,
}

impl BudgetQuantiles {
    /// Nearest-rank quantiles of the recorded budgets.
    pub fn from_budgets(budgets: &[u64]) -> Option<Self> {
        if budgets.is_empty() {
            return None;
        }
        let mut sorted = budgets.to_vec();
        sorted.sort_unstable();
        let rank = |q: f64| {
            let r = (q * sorted.len() as f64).ceil() as usize;
            sorted[r.clamp(1, sorted.len()) - 1]
        };
        Some(BudgetQuantiles {
            min: sorted[0],
            median: rank(0.5),
            p90: rank(0.9),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Environment oracles reported next to the empirical results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub s_star_squared: Option<f64>,
    pub k_star: Option<u32>,
    pub tau_bound: Option<f64>,
}

impl OracleSummary {
    pub fn compute(config: &ExperimentConfig) -> Result<Self> {
        let env = &config.environment;
        match env.signal_to_noise() {
            Ok(s) => {
                let bound = budget_bound(env.num_arms(), config.delta, s)?;
                Ok(OracleSummary {
                    s_star_squared: Some(s),
                    k_star: Some(bound.k_star),
                    tau_bound: Some(bound.tau_bound),
                })
            }
            Err(Error::NoSeparatedPair) => Ok(OracleSummary {
                s_star_squared: None,
                k_star: None,
                tau_bound: None,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub trials: u64,
    pub delta: f64,
    pub clusters: usize,
    pub mode: ThresholdMode,
    pub root_seed: u64,
    pub correct_count: u64,
    pub incorrect_count: u64,
    pub cap_exceeded_count: u64,
    /// Incorrect plus cap-exceeded.
    pub error_count: u64,
    pub error_rate: f64,
    pub budget: BudgetQuantiles,
    pub oracle: OracleSummary,
    /// Fraction of trials with `τ ≤ tau_bound`, when the bound is defined.
    pub within_bound_fraction: Option<f64>,
    pub trial_reports: Vec<TrialDigest>,
}

/// Runs trial `trial` of the experiment.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<TrialDigest> {
    let seed = trial_seed(config.seed, trial);
    let env = &config.environment;
    let report = match config.variant {
        Variant::Adaptive => {
            let params = KabcParams {
                delta: config.delta,
                clusters: config.clusters,
                mode: config.mode,
                cap: config.cap,
                sample_limit: config.sample_limit,
            };
            kabc(env, &params, seed)?
        }
        Variant::Nonadaptive { s0_squared } => {
            let trace = run_nonadaptive(env, config.delta, s0_squared, config.mode, seed)?;
            RunReport::from_single_round(&trace, env.true_partition())
        }
    };
    Ok(TrialDigest {
        trial,
        seed: seed.0,
        report,
    })
}

/// Reduces per-trial digests to the summary. Aggregates do not depend on the
/// order of `digests`; the per-trial list is kept in the order given.
pub fn aggregate(config: &ExperimentConfig, oracle: OracleSummary, digests: Vec<TrialDigest>) -> Result<MonteCarloReport> {
    let budgets: Vec<u64> = digests.iter().map(|d| d.report.budget).collect();
    let budget = BudgetQuantiles::from_budgets(&budgets).ok_or_else(|| Error::input("no trials to aggregate"))?;
    let trials = digests.len() as u64;
    let cap_exceeded_count = digests
        .iter()
        .filter(|d| d.report.stopped_at == StopReason::CapExceeded)
        .count() as u64;
    let correct_count = digests.iter().filter(|d| d.report.correct).count() as u64;
    let incorrect_count = trials - correct_count - cap_exceeded_count;
    let error_count = incorrect_count + cap_exceeded_count;
    let within_bound_fraction = oracle.tau_bound.map(|bound| {
        budgets.iter().filter(|&&b| b as f64 <= bound).count() as f64 / trials as f64
    });
    Ok(MonteCarloReport {
        trials,
        delta: config.delta,
        clusters: config.clusters,
        mode: config.mode,
        root_seed: config.seed,
        correct_count,
        incorrect_count,
        cap_exceeded_count,
        error_count,
        error_rate: error_count as f64 / trials as f64,
        budget,
        oracle,
        within_bound_fraction,
        trial_reports: digests,
    })
}

/// Runs every trial (in parallel up to `config.workers`) and aggregates in trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<MonteCarloReport> {
    let oracle = OracleSummary::compute(config)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::input(format!("cannot start worker pool: {e}")))?;
    let digests = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect::<Result<Vec<_>>>()
    })?;
    aggregate(config, oracle, digests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn config(arms: &str, extra: &str) -> ExperimentConfig {
        let trials = if extra.contains("trials") { "" } else { "trials = 20\n" };
        parse_config(&format!(
            "delta = 0.1\n{trials}seed = 9\n{extra}\n[kernel]\nfamily = \"gaussian-rbf\"\nbandwidth = 1.0\ndimension = 1\n{arms}"
        ))
        .unwrap()
    }

    const IDENTICAL: &str = "[[arms]]\ncount = 3\nkind = \"discrete\"\nsupport = [[0.0], [1.0]]\nprobabilities = [0.5, 0.5]\n";
    const MIXED: &str = "[[arms]]\ncount = 2\nkind = \"discrete\"\nsupport = [[0.0], [1.0]]\nprobabilities = [0.5, 0.5]\n[[arms]]\nkind = \"discrete\"\nsupport = [[3.0]]\nprobabilities = [1.0]\n";

    #[test]
    fn quantiles_nearest_rank() {
        let q = BudgetQuantiles::from_budgets(&[5, 1, 4, 2, 3, 10, 9, 8, 7, 6]).unwrap();
        assert_eq!((q.min, q.median, q.p90, q.max), (1, 5, 9, 10));
        let q = BudgetQuantiles::from_budgets(&[7]).unwrap();
        assert_eq!((q.min, q.median, q.p90, q.max), (7, 7, 7, 7));
        assert!(BudgetQuantiles::from_budgets(&[]).is_none());
    }

    #[test]
    fn identical_arms_never_err() {
        let c = config(IDENTICAL, "trials = 100");
        let r = run_trials(&c).unwrap();
        assert_eq!(r.trials, 100);
        assert_eq!(r.error_count, 0);
        assert_eq!(r.error_rate, 0.0);
        assert!(r.trial_reports.iter().all(|d| d.report.stopped_at == StopReason::Iteration(1)));
        assert_eq!(r.oracle.s_star_squared, None);
        assert_eq!(r.within_bound_fraction, None);
    }

    #[test]
    fn cap_exceeded_counted_separately() {
        let c = config(IDENTICAL, "clusters = 2\ncap = 3");
        let r = run_trials(&c).unwrap();
        assert_eq!(r.cap_exceeded_count, 20);
        assert_eq!(r.correct_count, 0);
        assert_eq!(r.incorrect_count, 0);
        assert_eq!(r.error_rate, 1.0);
    }

    #[test]
    fn deterministic_and_worker_independent() {
        let a = run_trials(&config(MIXED, "workers = 1")).unwrap();
        let b = run_trials(&config(MIXED, "workers = 3")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trial_reports[4].seed, trial_seed(9, 4).0);
        assert!(a.oracle.tau_bound.is_some());
    }

    #[test]
    fn aggregates_ignore_trial_order() {
        let c = config(MIXED, "");
        let r = run_trials(&c).unwrap();
        let mut shuffled = r.trial_reports.clone();
        shuffled.reverse();
        shuffled.rotate_left(7);
        let s = aggregate(&c, r.oracle, shuffled.clone()).unwrap();
        assert_eq!(s.trial_reports, shuffled);
        let strip = |mut m: MonteCarloReport| {
            m.trial_reports.clear();
            m
        };
        assert_eq!(strip(s), strip(r));
    }

    #[test]
    fn nonadaptive_variant_reports_single_round() {
        let c = config(MIXED, "variant = \"nonadaptive\"\ns0_squared = 0.5");
        let r = run_trials(&c).unwrap();
        for d in &r.trial_reports {
            assert_eq!(d.report.per_iteration.len(), 1);
            assert_eq!(d.report.budget, d.report.recount_budget(3));
        }
    }
}
