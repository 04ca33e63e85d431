//! Synthetic bandit environments and their exact oracles.
//!
//! An [`Environment`] fixes one sampling distribution per arm plus the
//! kernel. The ground-truth partition groups arms whose (canonicalized)
//! [`ArmSpec`]s are structurally equal: within the built-in families this is
//! the same as equality of distributions, and with a characteristic kernel it
//! is the same as equality of kernel mean embeddings.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clusterer::Partition;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::seed::{ArmRng, StreamSeed};

/// Paired draws used by the Monte Carlo oracles for continuous arms.
pub const MONTE_CARLO_ORACLE_DRAWS: usize = 1_000_000;

const ORACLE_SEED: u64 = 0x6b61_6263_6f72_636c;
const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ArmSpec {
    /// Finite support with the given probabilities.
    Discrete {
        support: Vec<Vec<f64>>,
        probabilities: Vec<f64>,
    },
    /// Isotropic Gaussian `mean + scale·Z`, conditioned on `‖x − mean‖ ≤ radius`.
    TruncatedGaussian {
        mean: Vec<f64>,
        scale: f64,
        radius: f64,
    },
}

impl ArmSpec {
    pub fn point_mass(point: Vec<f64>) -> Self {
        ArmSpec::Discrete {
            support: vec![point],
            probabilities: vec![1.0],
        }
    }

    pub fn discrete(support: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        let dim = support.first().map_or(0, Vec::len);
        ArmSpec::Discrete {
            support,
            probabilities,
        }
        .canonical(dim)
    }

    pub fn truncated_gaussian(mean: Vec<f64>, scale: f64, radius: f64) -> Result<Self> {
        let dim = mean.len();
        ArmSpec::TruncatedGaussian {
            mean,
            scale,
            radius,
        }
        .canonical(dim)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ArmSpec::Discrete { .. })
    }

    /// Validates against dimension `dim` and returns the canonical form:
    /// zero-probability atoms dropped, support sorted lexicographically.
    pub fn canonical(self, dim: usize) -> Result<Self> {
        match self {
            ArmSpec::Discrete {
                support,
                probabilities,
            } => {
                if support.is_empty() {
                    return Err(Error::input("discrete arm has an empty support"));
                }
                if support.len() != probabilities.len() {
                    return Err(Error::input(format!(
                        "discrete arm has {} support points but {} probabilities",
                        support.len(),
                        probabilities.len()
                    )));
                }
                for p in &support {
                    check_dim(p, dim)?;
                    if p.iter().any(|v| !v.is_finite()) {
                        return Err(Error::input("support point has a non-finite coordinate"));
                    }
                }
                if probabilities.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(Error::input("probabilities must be nonnegative and finite"));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::input(format!(
                        "probabilities sum to {total}, expected 1"
                    )));
                }
                let mut atoms: Vec<(Vec<f64>, f64)> = support
                    .into_iter()
                    .zip(probabilities)
                    .filter(|(_, p)| *p > 0.0)
                    .collect();
                atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));
                if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
                    return Err(Error::input("support points must be pairwise distinct"));
                }
                let (support, probabilities) = atoms.into_iter().unzip();
                Ok(ArmSpec::Discrete {
                    support,
                    probabilities,
                })
            }
            ArmSpec::TruncatedGaussian {
                mean,
                scale,
                radius,
            } => {
                check_dim(&mean, dim)?;
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::input("mean has a non-finite coordinate"));
                }
                if !(scale.is_finite() && scale > 0.0) {
                    return Err(Error::input(format!("scale must be positive, got {scale}")));
                }
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::input(format!("radius must be positive, got {radius}")));
                }
                Ok(ArmSpec::TruncatedGaussian {
                    mean,
                    scale,
                    radius,
                })
            }
        }
    }

    fn dimension(&self) -> usize {
        match self {
            ArmSpec::Discrete { support, .. } => support[0].len(),
            ArmSpec::TruncatedGaussian { mean, .. } => mean.len(),
        }
    }

    /// Draws one point into `out` (length = dimension).
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, sampler: &ArmSampler, out: &mut [f64]) {
        match (self, sampler) {
            (ArmSpec::Discrete { support, .. }, ArmSampler::Discrete(weights)) => {
                out.copy_from_slice(&support[weights.sample(rng)]);
            }
            (
                ArmSpec::TruncatedGaussian {
                    mean,
                    scale,
                    radius,
                },
                ArmSampler::Gaussian,
            ) => loop {
                let mut sq = 0.0;
                for (o, m) in out.iter_mut().zip(mean) {
                    let z: f64 = rng.sample(StandardNormal);
                    let step = scale * z;
                    sq += step * step;
                    *o = m + step;
                }
                if sq.sqrt() <= *radius {
                    break;
                }
            },
            _ => unreachable!("sampler built from a different arm kind"),
        }
    }

    fn sampler(&self) -> ArmSampler {
        match self {
            ArmSpec::Discrete { probabilities, .. } => ArmSampler::Discrete(
                WeightedIndex::new(probabilities).expect("validated probabilities"),
            ),
            ArmSpec::TruncatedGaussian { .. } => ArmSampler::Gaussian,
        }
    }
}

enum ArmSampler {
    Discrete(WeightedIndex<f64>),
    Gaussian,
}

fn check_dim(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    Ok(())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// The `n` observations drawn from one arm, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    arm: usize,
    dimension: usize,
    coords: Vec<f64>,
}

impl SampleBatch {
    pub fn new(arm: usize, points: &[Vec<f64>]) -> Result<Self> {
        let dimension = points.first().map_or(0, Vec::len);
        if points.is_empty() || dimension == 0 {
            return Err(Error::input("a sample batch needs at least one point"));
        }
        let mut coords = Vec::with_capacity(points.len() * dimension);
        for p in points {
            check_dim(p, dimension)?;
            coords.extend_from_slice(p);
        }
        Ok(SampleBatch {
            arm,
            dimension,
            coords,
        })
    }

    pub fn arm(&self) -> usize {
        self.arm
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, t: usize) -> &[f64] {
        &self.coords[t * self.dimension..(t + 1) * self.dimension]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dimension)
    }
}

/// Anything that can be pulled like a bandit arm.
pub trait Bandit: Sync {
    fn num_arms(&self) -> usize;
    fn kernel(&self) -> &KernelSpec;
    /// Ground truth, used only to score a finished run.
    fn true_partition(&self) -> &Partition;
    fn sample(&self, arm: usize, n: usize, rng: &mut ArmRng) -> Result<SampleBatch>;
}

/// A value computed by an oracle; `std_error` is set when it is a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

impl OracleValue {
    fn exact(value: f64) -> Self {
        OracleValue {
            value,
            std_error: None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.std_error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    arms: Vec<ArmSpec>,
    kernel: KernelSpec,
    true_partition: Partition,
}

impl Environment {
    pub fn new(arms: Vec<ArmSpec>, kernel: KernelSpec) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::input(format!(
                "an environment needs at least 2 arms, got {}",
                arms.len()
            )));
        }
        let arms = arms
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                a.canonical(kernel.dimension())
                    .map_err(|e| Error::input(format!("arm {i}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut labels = Vec::with_capacity(arms.len());
        let mut representatives: Vec<usize> = Vec::new();
        for (i, arm) in arms.iter().enumerate() {
            match representatives.iter().position(|&r| arms[r] == *arm) {
                Some(label) => labels.push(label),
                None => {
                    labels.push(representatives.len());
                    representatives.push(i);
                }
            }
        }
        Ok(Environment {
            true_partition: Partition::from_labels(&labels),
            arms,
            kernel,
        })
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn num_clusters(&self) -> usize {
        self.true_partition.num_blocks()
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(Error::ArmOutOfRange {
                arm,
                n_arms: self.arms.len(),
            });
        }
        Ok(())
    }

    /// Exact `‖μ_i − μ_j‖` for discrete pairs; Monte Carlo otherwise.
    pub fn true_mmd(&self, i: usize, j: usize) -> Result<OracleValue> {
        self.check_arm(i)?;
        self.check_arm(j)?;
        if i == j {
            return Err(Error::input("true_mmd needs two distinct arms"));
        }
        let (a, b) = (&self.arms[i], &self.arms[j]);
        if a == b {
            return Ok(OracleValue::exact(0.0));
        }
        if i > j {
            return self.true_mmd(j, i);
        }
        match (a, b) {
            (
                ArmSpec::Discrete {
                    support: xs,
                    probabilities: ps,
                },
                ArmSpec::Discrete {
                    support: ys,
                    probabilities: qs,
                },
            ) => {
                let sq = self.cross(xs, ps, xs, ps) + self.cross(ys, qs, ys, qs)
                    - 2.0 * self.cross(xs, ps, ys, qs);
                Ok(OracleValue::exact(clamp_nonnegative(sq, "squared MMD")?.sqrt()))
            }
            _ => Ok(self.monte_carlo_mmd(i, j)),
        }
    }

    /// `V*_i = E g(X, X) − E g(X, X')`.
    pub fn true_variance(&self, i: usize) -> Result<OracleValue> {
        self.check_arm(i)?;
        match &self.arms[i] {
            ArmSpec::Discrete {
                support,
                probabilities,
            } => {
                let diag: f64 = support
                    .iter()
                    .zip(probabilities)
                    .map(|(x, p)| p * self.kernel.eval(x, x))
                    .sum();
                let v = diag - self.cross(support, probabilities, support, probabilities);
                Ok(OracleValue::exact(clamp_nonnegative(v, "RKHS variance")?))
            }
            ArmSpec::TruncatedGaussian { .. } => Ok(self.monte_carlo_variance(i)),
        }
    }

    /// The variance-aware signal-to-noise ratio `s_*²`.
    ///
    /// Minimum over separated pairs of `min(‖μ_i−μ_j‖² / (V*_i ∨ V*_j), 2‖μ_i−μ_j‖/√ḡ)`;
    /// the first term is `+∞` when both variances vanish.
    pub fn signal_to_noise(&self) -> Result<f64> {
        if self.num_clusters() < 2 {
            return Err(Error::NoSeparatedPair);
        }
        let g_bar = self.kernel.bounds().g_bar;
        let variances = (0..self.arms.len())
            .map(|i| self.true_variance(i).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        let mut best = f64::INFINITY;
        for i in 0..self.arms.len() {
            for j in (i + 1)..self.arms.len() {
                if self.true_partition.same_block(i, j) {
                    continue;
                }
                let mmd = self.true_mmd(i, j)?.value;
                let noise = variances[i].max(variances[j]);
                let variance_term = if noise > 0.0 {
                    mmd * mmd / noise
                } else {
                    f64::INFINITY
                };
                let sup_term = 2.0 * mmd / g_bar.sqrt();
                best = best.min(variance_term.min(sup_term));
            }
        }
        Ok(best)
    }

    fn cross(&self, xs: &[Vec<f64>], ps: &[f64], ys: &[Vec<f64>], qs: &[f64]) -> f64 {
        let mut total = 0.0;
        for (x, p) in xs.iter().zip(ps) {
            for (y, q) in ys.iter().zip(qs) {
                total += p * q * self.kernel.eval(x, y);
            }
        }
        total
    }

    fn monte_carlo_mmd(&self, i: usize, j: usize) -> OracleValue {
        let (a, b) = (&self.arms[i], &self.arms[j]);
        let (sa, sb) = (a.sampler(), b.sampler());
        let seed = StreamSeed::new(ORACLE_SEED).child(i as u64).child(j as u64);
        let mut rng = seed.rng();
        let d = self.kernel.dimension();
        let (mut x, mut x2, mut y, mut y2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let stats = welford(MONTE_CARLO_ORACLE_DRAWS, || {
            a.draw_into(&mut rng, &sa, &mut x);
            a.draw_into(&mut rng, &sa, &mut x2);
            b.draw_into(&mut rng, &sb, &mut y);
            b.draw_into(&mut rng, &sb, &mut y2);
            let k = &self.kernel;
            k.eval(&x, &x2) + k.eval(&y, &y2) - k.eval(&x, &y2) - k.eval(&x2, &y)
        });
        // Square-root of an unbiased MMD² estimate; delta-method error away from 0.
        let value = stats.mean.max(0.0).sqrt();
        let se_sq = stats.std_error();
        let std_error = if value > se_sq.sqrt() {
            se_sq / (2.0 * value)
        } else {
            se_sq.sqrt()
        };
        OracleValue {
            value,
            std_error: Some(std_error),
        }
    }

    fn monte_carlo_variance(&self, i: usize) -> OracleValue {
        let a = &self.arms[i];
        let sa = a.sampler();
        let mut rng = StreamSeed::new(ORACLE_SEED).child(u64::MAX - i as u64).rng();
        let d = self.kernel.dimension();
        let (mut x, mut x2) = (vec![0.0; d], vec![0.0; d]);
        let stats = welford(MONTE_CARLO_ORACLE_DRAWS, || {
            a.draw_into(&mut rng, &sa, &mut x);
            a.draw_into(&mut rng, &sa, &mut x2);
            self.kernel.eval(&x, &x) - self.kernel.eval(&x, &x2)
        });
        OracleValue {
            value: stats.mean.max(0.0),
            std_error: Some(stats.std_error()),
        }
    }
}

impl Bandit for Environment {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    fn true_partition(&self) -> &Partition {
        &self.true_partition
    }

    /// `n` i.i.d. draws from arm `arm`.
    fn sample(&self, arm: usize, n: usize, rng: &mut ArmRng) -> Result<SampleBatch> {
        self.check_arm(arm)?;
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        let spec = &self.arms[arm];
        let d = spec.dimension();
        let sampler = spec.sampler();
        let mut coords = vec![0.0; n * d];
        for chunk in coords.chunks_exact_mut(d) {
            spec.draw_into(rng, &sampler, chunk);
        }
        Ok(SampleBatch {
            arm,
            dimension: d,
            coords,
        })
    }
}

/// Wraps a bandit and counts every sample it hands out.
#[derive(Debug)]
pub struct CountingBandit<'a, B> {
    inner: &'a B,
    drawn: AtomicU64,
}

impl<'a, B: Bandit> CountingBandit<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        CountingBandit {
            inner,
            drawn: AtomicU64::new(0),
        }
    }

    pub fn drawn(&self) -> u64 {
        self.drawn.load(Ordering::Relaxed)
    }
}

impl<B: Bandit> Bandit for CountingBandit<'_, B> {
    fn num_arms(&self) -> usize {
        self.inner.num_arms()
    }

    fn kernel(&self) -> &KernelSpec {
        self.inner.kernel()
    }

    fn true_partition(&self) -> &Partition {
        self.inner.true_partition()
    }

    fn sample(&self, arm: usize, n: usize, rng: &mut ArmRng) -> Result<SampleBatch> {
        let batch = self.inner.sample(arm, n, rng)?;
        self.drawn.fetch_add(batch.len() as u64, Ordering::Relaxed);
        Ok(batch)
    }
}

pub(crate) fn clamp_nonnegative(v: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -CLAMP_TOLERANCE {
        Ok(0.0)
    } else {
        Err(Error::Numerical(format!("{what} is {v}, below -{CLAMP_TOLERANCE}")))
    }
}

struct MeanStats {
    mean: f64,
    m2: f64,
    count: usize,
}

impl MeanStats {
    fn std_error(&self) -> f64 {
        (self.m2 / (self.count as f64 - 1.0) / self.count as f64).sqrt()
    }
}

fn welford(count: usize, mut draw: impl FnMut() -> f64) -> MeanStats {
    let mut s = MeanStats {
        mean: 0.0,
        m2: 0.0,
        count: 0,
    };
    for _ in 0..count {
        let x = draw();
        s.count += 1;
        let delta = x - s.mean;
        s.mean += delta / s.count as f64;
        s.m2 += delta * (x - s.mean);
    }
    s
}
