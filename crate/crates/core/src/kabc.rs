//! The adaptive outer loop: a doubling per-arm budget with a shrinking
//! per-round confidence, stopping at the first round that finds `K` clusters.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clusterer::{cluster, ClusterTrace, Partition};
use crate::environment::Bandit;
use crate::error::{Error, Result};
use crate::seed::StreamSeed;
use crate::statistics::{union_log, ThresholdMode};

pub const DEFAULT_CAP: u32 = 40;

/// Per-arm budgets above this stop the run as cap-exceeded instead of sampling.
pub const DEFAULT_SAMPLE_LIMIT: u64 = 1 << 26;

/// Largest integer that `f64` represents exactly.
const EXACT_F64_LIMIT: f64 = 9_007_199_254_740_992.0;

/// Round `k` of the doubling schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub k: u32,
    /// `δ / (4k²)`
    pub delta_k: f64,
    /// `⌈2^k · ln(8(N²−N)/δ_k)⌉`
    pub n_k: u64,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("delta must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// Per-round confidence `δ_k = δ / (4k²)`; these sum to at most `δ·π²/24`.
pub fn round_confidence(k: u32, delta: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::input("iterations are numbered from 1"));
    }
    check_delta(delta)?;
    let kf = f64::from(k);
    Ok(delta / (4.0 * kf * kf))
}

pub fn schedule(k: u32, delta: f64, n_arms: usize) -> Result<Schedule> {
    let delta_k = round_confidence(k, delta)?;
    let raw = (2f64).powi(k as i32) * union_log(n_arms, delta_k)?;
    if !(raw < EXACT_F64_LIMIT) {
        return Err(Error::input(format!("per-arm budget overflows at iteration {k}")));
    }
    Ok(Schedule {
        k,
        delta_k,
        n_k: raw.ceil() as u64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// Found `K` clusters at this iteration.
    Iteration(u32),
    /// Ran out of iterations (or hit the per-arm sample limit) first.
    CapExceeded,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::Iteration(k) => write!(f, "{k}"),
            StopReason::CapExceeded => f.write_str("cap-exceeded"),
        }
    }
}

impl Serialize for StopReason {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StopReason::Iteration(k) => s.serialize_u32(*k),
            StopReason::CapExceeded => s.serialize_str("cap-exceeded"),
        }
    }
}

impl<'de> Deserialize<'de> for StopReason {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Iteration(u32),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Iteration(k) => Ok(StopReason::Iteration(k)),
            Raw::Tag(t) if t == "cap-exceeded" => Ok(StopReason::CapExceeded),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("unknown stop reason `{t}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u32,
    pub n_k: u64,
    pub delta_k: f64,
    pub n_blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub stopped_at: StopReason,
    /// Total samples drawn over all executed iterations.
    pub budget: u64,
    pub partition: Partition,
    pub per_iteration: Vec<IterationRecord>,
    /// Matches the ground truth; always false when the cap was hit.
    pub correct: bool,
}

impl RunReport {
    /// Budget recomputed from the per-iteration trace.
    pub fn recount_budget(&self, n_arms: usize) -> u64 {
        n_arms as u64 * self.per_iteration.iter().map(|r| r.n_k).sum::<u64>()
    }

    /// Wraps a single non-adaptive round as a one-iteration report.
    pub fn from_single_round(trace: &ClusterTrace, truth: &Partition) -> Self {
        RunReport {
            stopped_at: StopReason::Iteration(1),
            budget: trace.samples_drawn,
            partition: trace.partition.clone(),
            per_iteration: vec![IterationRecord {
                k: 1,
                n_k: trace.n as u64,
                delta_k: trace.delta_prime,
                n_blocks: trace.partition.num_blocks(),
            }],
            correct: trace.partition == *truth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KabcParams {
    pub delta: f64,
    /// Number of clusters `K` to stop at.
    pub clusters: usize,
    pub mode: ThresholdMode,
    pub cap: u32,
    pub sample_limit: u64,
}

impl KabcParams {
    pub fn new(delta: f64, clusters: usize) -> Self {
        KabcParams {
            delta,
            clusters,
            mode: ThresholdMode::VarianceAware,
            cap: DEFAULT_CAP,
            sample_limit: DEFAULT_SAMPLE_LIMIT,
        }
    }

    pub fn with_mode(mut self, mode: ThresholdMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.cap = cap;
        self
    }
}

/// Runs the adaptive procedure until a round returns exactly `K` clusters.
///
/// Round `k` samples from `seed.child(k)`. Every drawn sample is charged to
/// the budget, including those of rounds that did not stop.
pub fn kabc<B: Bandit>(bandit: &B, params: &KabcParams, seed: StreamSeed) -> Result<RunReport> {
    check_delta(params.delta)?;
    let n_arms = bandit.num_arms();
    if params.clusters == 0 || params.clusters > n_arms {
        return Err(Error::input(format!(
            "cluster count must lie in 1..={n_arms}, got {}",
            params.clusters
        )));
    }
    if params.cap == 0 {
        return Err(Error::input("iteration cap must be at least 1"));
    }

    let mut budget = 0u64;
    let mut per_iteration = Vec::new();
    let mut last: Option<Partition> = None;
    for k in 1..=params.cap {
        let step = schedule(k, params.delta, n_arms)?;
        if step.n_k > params.sample_limit {
            break;
        }
        let trace = cluster(
            bandit,
            step.n_k as usize,
            step.delta_k,
            params.mode,
            seed.child(u64::from(k)),
        )?;
        budget += trace.samples_drawn;
        let n_blocks = trace.partition.num_blocks();
        per_iteration.push(IterationRecord {
            k,
            n_k: step.n_k,
            delta_k: step.delta_k,
            n_blocks,
        });
        if n_blocks == params.clusters {
            let correct = trace.partition == *bandit.true_partition();
            return Ok(RunReport {
                stopped_at: StopReason::Iteration(k),
                budget,
                partition: trace.partition,
                per_iteration,
                correct,
            });
        }
        last = Some(trace.partition);
    }
    Ok(RunReport {
        stopped_at: StopReason::CapExceeded,
        budget,
        // With no executed round, report every arm on its own.
        partition: last.unwrap_or_else(|| Partition::from_labels(&(0..n_arms).collect::<Vec<_>>())),
        per_iteration,
        correct: false,
    })
}

/// `n_* = ⌈128 · ln(8(N²−N)/δ) / s0²⌉`, floored at 2.
pub fn nonadaptive_budget(n_arms: usize, delta: f64, s0_squared: f64) -> Result<u64> {
    check_delta(delta)?;
    if !(s0_squared > 0.0) {
        return Err(Error::input(format!("s0_squared must be positive, got {s0_squared}")));
    }
    let raw = 128.0 / s0_squared * union_log(n_arms, delta)?;
    if !(raw < EXACT_F64_LIMIT) {
        return Err(Error::input("non-adaptive budget overflows"));
    }
    Ok((raw.ceil() as u64).max(2))
}

/// A single fixed-budget round sized from a known lower bound on `s_*²`.
pub fn run_nonadaptive<B: Bandit>(
    bandit: &B,
    delta: f64,
    s0_squared: f64,
    mode: ThresholdMode,
    seed: StreamSeed,
) -> Result<ClusterTrace> {
    let n = nonadaptive_budget(bandit.num_arms(), delta, s0_squared)?;
    cluster(bandit, n as usize, delta, mode, seed.child(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetBound {
    pub k_star: u32,
    pub tau_bound: f64,
}

/// High-probability budget bound
/// `τ ≤ 8N · (128/s_*² ∨ 1) · ln(32(N²−N)·k_*²/δ)` with
/// `k_* = ⌈log₂(128/s_*²)⌉ ∨ 1`.
pub fn budget_bound(n_arms: usize, delta: f64, s_star_squared: f64) -> Result<BudgetBound> {
    check_delta(delta)?;
    if n_arms < 2 {
        return Err(Error::input(format!("need at least 2 arms, got {n_arms}")));
    }
    if !(s_star_squared > 0.0) {
        return Err(Error::input(format!(
            "s_star_squared must be positive, got {s_star_squared}"
        )));
    }
    let ratio = 128.0 / s_star_squared;
    let k_star = (ratio.log2().ceil().max(1.0)) as u32;
    let pairs = (n_arms * n_arms - n_arms) as f64;
    let ks = f64::from(k_star);
    let tau_bound = 8.0 * n_arms as f64 * ratio.max(1.0) * (32.0 * pairs * ks * ks / delta).ln();
    Ok(BudgetBound { k_star, tau_bound })
}
