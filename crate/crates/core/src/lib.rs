//! Nonparametric clustering of bandit arms by their kernel mean embeddings.
//!
//! Arms are grouped by equality of their embeddings in the RKHS of a bounded
//! translation-invariant kernel. [`kabc::kabc`] repeatedly calls the
//! fixed-budget [`clusterer::cluster`] round with a doubling per-arm budget
//! until it finds the requested number of clusters; every round compares all
//! pairs of arms with a variance-aware MMD test.
//!
//! Arm indices are 0-based throughout.

pub mod clusterer;
pub mod environment;
pub mod error;
pub mod harness;
pub mod kabc;
pub mod kernel;
pub mod seed;
pub mod statistics;

pub use clusterer::{cluster, connected_components, ClusterTrace, PairRecord, Partition};
pub use environment::{ArmSpec, Bandit, CountingBandit, Environment, OracleValue, SampleBatch};
pub use error::{Error, Result};
pub use kabc::{budget_bound, kabc, round_confidence, run_nonadaptive, schedule, BudgetBound, KabcParams, RunReport, Schedule, StopReason};
pub use kernel::{KernelBounds, KernelFamily, KernelSpec};
pub use seed::StreamSeed;
pub use statistics::{
    empirical_mmd, empirical_variance, oracle_deviation_bound, threshold, threshold_subgaussian,
    PairStatistics, ThresholdMode,
};
