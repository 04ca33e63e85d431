//! Empirical kernel statistics and the decision thresholds built on them.
//!
//! Both estimators are plug-in V-statistics: the double sums keep their
//! diagonal terms. Each arm's batch is first reduced to an [`ArmSummary`]
//! (distinct points with multiplicities plus its within-arm kernel sum), so
//! the within-arm Gram work is done once and shared by the variance and by
//! every pairwise MMD that involves the arm.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::environment::{clamp_nonnegative, SampleBatch};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Empirical-variance (Bernstein-type) threshold.
    #[default]
    VarianceAware,
    /// Kernel-uniform threshold that only uses `ḡ`.
    Subgaussian,
}

impl std::fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThresholdMode::VarianceAware => f.write_str("variance-aware"),
            ThresholdMode::Subgaussian => f.write_str("subgaussian"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStatistics {
    pub mmd_hat: f64,
    pub var_hat_i: f64,
    pub var_hat_j: f64,
    pub n: usize,
}

/// A batch collapsed to its distinct points, with the sums every statistic needs.
#[derive(Clone, Debug)]
pub struct ArmSummary {
    n: usize,
    dimension: usize,
    /// Distinct points, row-major.
    atoms: Vec<f64>,
    counts: Vec<f64>,
    /// `Σ_t g(X_t, X_t)`
    diag_sum: f64,
    /// `Σ_{s,t} g(X_s, X_t)`
    gram_sum: f64,
}

impl ArmSummary {
    pub fn new(kernel: &KernelSpec, batch: &SampleBatch) -> Result<Self> {
        if batch.dimension() != kernel.dimension() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dimension(),
                got: batch.dimension(),
            });
        }
        let d = batch.dimension();
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(batch.point(a), batch.point(b)));

        let mut atoms: Vec<f64> = Vec::new();
        let mut counts: Vec<f64> = Vec::new();
        for &t in &order {
            let p = batch.point(t);
            match atoms.rchunks_exact(d).next() {
                Some(last) if last == p => *counts.last_mut().expect("paired with atoms") += 1.0,
                _ => {
                    atoms.extend_from_slice(p);
                    counts.push(1.0);
                }
            }
        }

        let mut summary = ArmSummary {
            n: batch.len(),
            dimension: d,
            atoms,
            counts,
            diag_sum: 0.0,
            gram_sum: 0.0,
        };
        summary.diag_sum = summary
            .atoms()
            .zip(&summary.counts)
            .map(|(x, c)| c * kernel.eval(x, x))
            .sum();
        summary.gram_sum = weighted_cross(kernel, &summary, &summary);
        Ok(summary)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of distinct points in the batch.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.atoms.chunks_exact(self.dimension)
    }

    /// `V̂ = (1/(n−1)) Σ_t [g(X_t,X_t) − (1/n) Σ_s g(X_t,X_s)]`
    pub fn variance(&self) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::input(format!(
                "empirical variance needs at least 2 samples, got {}",
                self.n
            )));
        }
        let n = self.n as f64;
        clamp_nonnegative(
            (self.diag_sum - self.gram_sum / n) / (n - 1.0),
            "empirical variance",
        )
    }

    /// `‖μ̂_i − μ̂_j‖` between two summaries of equal size.
    pub fn mmd(&self, kernel: &KernelSpec, other: &ArmSummary) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::input(format!(
                "batches must have equal size, got {} and {}",
                self.n, other.n
            )));
        }
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        let cross = weighted_cross(kernel, self, other);
        let n2 = (self.n as f64) * (self.n as f64);
        let sq = (self.gram_sum + other.gram_sum - 2.0 * cross) / n2;
        Ok(clamp_nonnegative(sq, "squared empirical MMD")?.sqrt())
    }

    pub fn pair_statistics(&self, kernel: &KernelSpec, other: &ArmSummary) -> Result<PairStatistics> {
        Ok(PairStatistics {
            mmd_hat: self.mmd(kernel, other)?,
            var_hat_i: self.variance()?,
            var_hat_j: other.variance()?,
            n: self.n,
        })
    }
}

fn weighted_cross(kernel: &KernelSpec, a: &ArmSummary, b: &ArmSummary) -> f64 {
    let mut total = 0.0;
    for (x, cx) in a.atoms().zip(&a.counts) {
        let mut row = 0.0;
        for (y, cy) in b.atoms().zip(&b.counts) {
            row += cy * kernel.eval(x, y);
        }
        total += cx * row;
    }
    total
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Empirical MMD `‖μ̂_i − μ̂_j‖` between two equal-size batches.
pub fn empirical_mmd(kernel: &KernelSpec, batch_i: &SampleBatch, batch_j: &SampleBatch) -> Result<f64> {
    if batch_i.len() != batch_j.len() {
        return Err(Error::input(format!(
            "batches must have equal size, got {} and {}",
            batch_i.len(),
            batch_j.len()
        )));
    }
    ArmSummary::new(kernel, batch_i)?.mmd(kernel, &ArmSummary::new(kernel, batch_j)?)
}

/// Empirical RKHS variance of one batch (needs at least two points).
pub fn empirical_variance(kernel: &KernelSpec, batch: &SampleBatch) -> Result<f64> {
    if batch.len() < 2 {
        return Err(Error::input(format!(
            "empirical variance needs at least 2 samples, got {}",
            batch.len()
        )));
    }
    ArmSummary::new(kernel, batch)?.variance()
}

fn check_common(n: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::input("sample count must be at least 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("confidence must lie in (0, 1], got {delta}")));
    }
    Ok(())
}

/// `ln(8(N² − N)/δ′)`, the log factor shared by both thresholds and the schedule.
pub fn union_log(n_arms: usize, delta_prime: f64) -> Result<f64> {
    if n_arms < 2 {
        return Err(Error::input(format!("need at least 2 arms, got {n_arms}")));
    }
    if !(delta_prime > 0.0 && delta_prime <= 1.0) {
        return Err(Error::input(format!(
            "confidence must lie in (0, 1], got {delta_prime}"
        )));
    }
    let pairs = (n_arms * n_arms - n_arms) as f64;
    Ok((8.0 * pairs / delta_prime).ln())
}

/// Variance-aware threshold:
/// `(√V̂_i + √V̂_j)·√(2L/n) + (32/3)·√g̃·L/n` with `L = ln(8(N²−N)/δ′)`.
pub fn threshold(
    n: usize,
    delta_prime: f64,
    n_arms: usize,
    var_hat_i: f64,
    var_hat_j: f64,
    g_tilde: f64,
) -> Result<f64> {
    check_common(n, delta_prime)?;
    let log = union_log(n_arms, delta_prime)?;
    let n = n as f64;
    Ok((var_hat_i.sqrt() + var_hat_j.sqrt()) * (2.0 * log / n).sqrt()
        + (32.0 / 3.0) * g_tilde.sqrt() * log / n)
}

/// Kernel-uniform threshold `√(ḡ/n)·(√L + 2)`.
pub fn threshold_subgaussian(n: usize, delta_prime: f64, n_arms: usize, g_bar: f64) -> Result<f64> {
    check_common(n, delta_prime)?;
    let log = union_log(n_arms, delta_prime)?;
    Ok((g_bar / n as f64).sqrt() * (log.sqrt() + 2.0))
}

/// Deviation bound in terms of the true variances:
/// `(√V*_i + √V*_j)·√(2·ln(4/δ)/n) + (8/3)·√ḡ·ln(4/δ)/n`.
pub fn oracle_deviation_bound(
    n: usize,
    delta: f64,
    var_star_i: f64,
    var_star_j: f64,
    g_bar: f64,
) -> Result<f64> {
    check_common(n, delta)?;
    let log = (4.0 / delta).ln();
    let n = n as f64;
    Ok((var_star_i.sqrt() + var_star_j.sqrt()) * (2.0 * log / n).sqrt()
        + (8.0 / 3.0) * g_bar.sqrt() * log / n)
}
