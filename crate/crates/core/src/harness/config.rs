//! TOML experiment configuration.
//!
//! ```toml
//! delta = 0.1
//! clusters = "truth"        # or an integer K
//! mode = "variance-aware"   # or "subgaussian"
//! trials = 500
//! seed = 42
//! cap = 40                  # optional
//! variant = "adaptive"      # or "nonadaptive" (then s0_squared is required)
//! workers = 4               # optional
//!
//! [kernel]
//! family = "gaussian-rbf"   # or "laplacian"
//! bandwidth = 1.0
//! dimension = 1
//!
//! [[arms]]                  # one block of `count` arms sharing a distribution
//! count = 2
//! kind = "discrete"
//! support = [[0.0]]
//! probabilities = [1.0]
//!
//! [[arms]]
//! kind = "truncated-gaussian"
//! mean = [1.0]
//! scale = 0.5
//! radius = 2.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::environment::{ArmSpec, Environment};
use crate::error::{Error, Result};
use crate::kabc::{DEFAULT_CAP, DEFAULT_SAMPLE_LIMIT};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::statistics::ThresholdMode;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum Variant {
    Adaptive,
    Nonadaptive { s0_squared: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterCount {
    Truth,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub environment: Environment,
    pub delta: f64,
    pub cluster_count: ClusterCount,
    /// `K`, with `"truth"` already resolved.
    pub clusters: usize,
    pub mode: ThresholdMode,
    pub trials: u64,
    pub seed: u64,
    pub cap: u32,
    pub sample_limit: u64,
    pub variant: Variant,
    pub workers: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    delta: f64,
    #[serde(default = "default_clusters")]
    clusters: RawClusters,
    #[serde(default)]
    mode: Option<String>,
    #[serde(default = "default_trials")]
    trials: u64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    cap: Option<u32>,
    #[serde(default)]
    sample_limit: Option<u64>,
    #[serde(default)]
    variant: Option<String>,
    #[serde(default)]
    s0_squared: Option<f64>,
    #[serde(default)]
    workers: Option<usize>,
    kernel: RawKernel,
    arms: Vec<RawArmBlock>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawClusters {
    Count(i64),
    Word(String),
}

fn default_clusters() -> RawClusters {
    RawClusters::Word("truth".into())
}

fn default_trials() -> u64 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: String,
    bandwidth: f64,
    dimension: i64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArmBlock {
    #[serde(default = "default_count")]
    count: i64,
    kind: String,
    support: Option<Vec<Vec<f64>>>,
    probabilities: Option<Vec<f64>>,
    mean: Option<Vec<f64>>,
    scale: Option<f64>,
    radius: Option<f64>,
}

fn default_count() -> i64 {
    1
}

fn required<T>(value: Option<T>, path: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(path, "missing required field"))
}

fn forbid<T>(value: &Option<T>, path: &str, kind: &str) -> Result<()> {
    if value.is_some() {
        return Err(Error::config(path, format!("not allowed for kind `{kind}`")));
    }
    Ok(())
}

impl RawArmBlock {
    fn into_spec(self, index: usize, dimension: usize) -> Result<(ArmSpec, usize)> {
        let at = |field: &str| format!("arms[{index}].{field}");
        if self.count < 1 {
            return Err(Error::config(at("count"), format!("must be at least 1, got {}", self.count)));
        }
        let spec = match self.kind.as_str() {
            "discrete" => {
                forbid(&self.mean, &at("mean"), "discrete")?;
                forbid(&self.scale, &at("scale"), "discrete")?;
                forbid(&self.radius, &at("radius"), "discrete")?;
                let support = required(self.support, &at("support"))?;
                let probabilities = required(self.probabilities, &at("probabilities"))?;
                if support.len() != probabilities.len() {
                    return Err(Error::config(
                        at("probabilities"),
                        format!("{} probabilities for {} support points", probabilities.len(), support.len()),
                    ));
                }
                if let Some(bad) = support.iter().position(|p| p.len() != dimension) {
                    return Err(Error::config(
                        format!("arms[{index}].support[{bad}]"),
                        format!("expected dimension {dimension}, got {}", support[bad].len()),
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(
                        at("probabilities"),
                        format!("arm block {index}: probabilities must be nonnegative and sum to 1 (sum is {total})"),
                    ));
                }
                ArmSpec::discrete(support, probabilities)
                    .map_err(|e| Error::config(at("support"), e.to_string()))?
            }
            "truncated-gaussian" => {
                forbid(&self.support, &at("support"), "truncated-gaussian")?;
                forbid(&self.probabilities, &at("probabilities"), "truncated-gaussian")?;
                let mean = required(self.mean, &at("mean"))?;
                if mean.len() != dimension {
                    return Err(Error::config(
                        at("mean"),
                        format!("expected dimension {dimension}, got {}", mean.len()),
                    ));
                }
                let scale = required(self.scale, &at("scale"))?;
                let radius = required(self.radius, &at("radius"))?;
                ArmSpec::truncated_gaussian(mean, scale, radius)
                    .map_err(|e| Error::config(format!("arms[{index}]"), e.to_string()))?
            }
            other => {
                return Err(Error::config(at("kind"), format!("unknown arm kind `{other}`")));
            }
        };
        Ok((spec, self.count as usize))
    }
}

/// Parses and validates a TOML experiment config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;

    if !(raw.delta > 0.0 && raw.delta <= 1.0) {
        return Err(Error::config("delta", format!("must lie in (0, 1], got {}", raw.delta)));
    }
    if raw.trials < 1 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let cap = raw.cap.unwrap_or(DEFAULT_CAP);
    if cap < 1 {
        return Err(Error::config("cap", "must be at least 1"));
    }
    let sample_limit = raw.sample_limit.unwrap_or(DEFAULT_SAMPLE_LIMIT);
    if sample_limit < 2 {
        return Err(Error::config("sample_limit", "must be at least 2"));
    }
    if raw.workers == Some(0) {
        return Err(Error::config("workers", "must be at least 1"));
    }
    let mode = match raw.mode.as_deref() {
        None | Some("variance-aware") => ThresholdMode::VarianceAware,
        Some("subgaussian") => ThresholdMode::Subgaussian,
        Some(other) => return Err(Error::config("mode", format!("unknown mode `{other}`"))),
    };
    let variant = match (raw.variant.as_deref(), raw.s0_squared) {
        (None | Some("adaptive"), None) => Variant::Adaptive,
        (None | Some("adaptive"), Some(_)) => {
            return Err(Error::config("s0_squared", "only used by the nonadaptive variant"));
        }
        (Some("nonadaptive"), Some(s0)) if s0 > 0.0 && s0.is_finite() => Variant::Nonadaptive { s0_squared: s0 },
        (Some("nonadaptive"), Some(s0)) => {
            return Err(Error::config("s0_squared", format!("must be positive, got {s0}")));
        }
        (Some("nonadaptive"), None) => {
            return Err(Error::config("s0_squared", "required by the nonadaptive variant"));
        }
        (Some(other), _) => return Err(Error::config("variant", format!("unknown variant `{other}`"))),
    };

    let family: KernelFamily = raw
        .kernel
        .family
        .parse()
        .map_err(|_| Error::config("kernel.family", format!("unknown kernel family `{}`", raw.kernel.family)))?;
    if raw.kernel.dimension < 1 {
        return Err(Error::config("kernel.dimension", "must be at least 1"));
    }
    let dimension = raw.kernel.dimension as usize;
    let kernel = KernelSpec::new(family, raw.kernel.bandwidth, dimension)
        .map_err(|e| Error::config("kernel.bandwidth", e.to_string()))?;

    if raw.arms.is_empty() {
        return Err(Error::config("arms", "at least one arm block is required"));
    }
    let mut arms = Vec::new();
    for (index, block) in raw.arms.into_iter().enumerate() {
        let (spec, count) = block.into_spec(index, dimension)?;
        arms.extend(std::iter::repeat(spec).take(count));
    }
    let environment = Environment::new(arms, kernel).map_err(|e| Error::config("arms", e.to_string()))?;

    let n_arms = environment.arms().len();
    let (cluster_count, clusters) = match raw.clusters {
        RawClusters::Word(w) if w == "truth" => (ClusterCount::Truth, environment.num_clusters()),
        RawClusters::Word(w) => {
            return Err(Error::config("clusters", format!("expected an integer or \"truth\", got `{w}`")));
        }
        RawClusters::Count(k) if k >= 1 && (k as usize) <= n_arms => (ClusterCount::Fixed(k as usize), k as usize),
        RawClusters::Count(k) => {
            return Err(Error::config("clusters", format!("must lie in 1..={n_arms}, got {k}")));
        }
    };

    Ok(ExperimentConfig {
        environment,
        delta: raw.delta,
        cluster_count,
        clusters,
        mode,
        trials: raw.trials,
        seed: raw.seed,
        cap,
        sample_limit,
        variant,
        workers: raw.workers,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Bandit;

    const MINIMAL: &str = r#"
delta = 0.1
clusters = "truth"

[kernel]
family = "gaussian-rbf"
bandwidth = 1.0
dimension = 1

[[arms]]
kind = "discrete"
support = [[0.0]]
probabilities = [1.0]

[[arms]]
kind = "discrete"
support = [[1.0]]
probabilities = [1.0]
"#;

    fn config_err(text: &str) -> (String, String) {
        match parse_config(text) {
            Err(Error::Config { path, message }) => (path, message),
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_resolves_truth() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.clusters, 2);
        assert_eq!(c.cluster_count, ClusterCount::Truth);
        assert_eq!(c.environment.num_arms(), 2);
        assert_eq!(c.trials, 1);
        assert_eq!(c.cap, DEFAULT_CAP);
        assert_eq!(c.mode, ThresholdMode::VarianceAware);
        assert_eq!(c.variant, Variant::Adaptive);
    }

    #[test]
    fn replication_counts_expand() {
        let text = MINIMAL.replacen("[[arms]]\nkind", "[[arms]]\ncount = 3\nkind", 1);
        let c = parse_config(&text).unwrap();
        assert_eq!(c.environment.num_arms(), 4);
        assert_eq!(c.clusters, 2);
    }

    #[test]
    fn simplex_violation_names_the_arm() {
        let text = MINIMAL.replacen(
            "support = [[1.0]]\nprobabilities = [1.0]",
            "support = [[1.0], [2.0]]\nprobabilities = [0.5, 0.6]",
            1,
        );
        let (path, message) = config_err(&text);
        assert_eq!(path, "arms[1].probabilities");
        assert!(message.contains("arm block 1"), "{message}");
    }

    #[test]
    fn delta_out_of_range() {
        let (path, _) = config_err(&MINIMAL.replace("delta = 0.1", "delta = 0"));
        assert_eq!(path, "delta");
        let (path, _) = config_err(&MINIMAL.replace("delta = 0.1", "delta = 1.5"));
        assert_eq!(path, "delta");
        assert!(parse_config(&MINIMAL.replace("delta = 0.1", "delta = 1.0")).is_ok());
    }

    #[test]
    fn unknown_family_and_fields() {
        let (path, message) = config_err(&MINIMAL.replace("gaussian-rbf", "cosine"));
        assert_eq!(path, "kernel.family");
        assert!(message.contains("cosine"));
        let (path, _) = config_err(&format!("bogus = 1\n{MINIMAL}"));
        assert_eq!(path, "<document>");
        let (path, _) = config_err(&MINIMAL.replace("clusters = \"truth\"", "clusters = 3"));
        assert_eq!(path, "clusters");
        let (path, _) = config_err(&MINIMAL.replace("dimension = 1", "dimension = 2"));
        assert_eq!(path, "arms[0].support[0]");
        let (path, _) = config_err(&MINIMAL.replace("kind = \"discrete\"", "kind = \"poisson\""));
        assert_eq!(path, "arms[0].kind");
    }

    #[test]
    fn variants() {
        let text = format!("variant = \"nonadaptive\"\ns0_squared = 2.0\n{MINIMAL}");
        assert_eq!(parse_config(&text).unwrap().variant, Variant::Nonadaptive { s0_squared: 2.0 });
        let (path, _) = config_err(&format!("variant = \"nonadaptive\"\n{MINIMAL}"));
        assert_eq!(path, "s0_squared");
        let (path, _) = config_err(&format!("mode = \"bayes\"\n{MINIMAL}"));
        assert_eq!(path, "mode");
    }

    #[test]
    fn truncated_gaussian_block() {
        let text = format!(
            "{MINIMAL}\n[[arms]]\nkind = \"truncated-gaussian\"\nmean = [0.5]\nscale = 0.3\nradius = 1.0\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.clusters, 3);
        let (path, _) = config_err(&text.replace("scale = 0.3", "scale = -0.3"));
        assert_eq!(path, "arms[2]");
    }
}
