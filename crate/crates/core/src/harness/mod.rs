//! Experiment plumbing: config files, the Monte Carlo driver, and report output.

pub mod config;
pub mod montecarlo;
pub mod report;

pub use config::{load_config, parse_config, ClusterCount, ExperimentConfig, Variant};
pub use montecarlo::{aggregate, run_trial, run_trials, trial_seed, BudgetQuantiles, MonteCarloReport, OracleSummary, TrialDigest};
pub use report::{emit_report, parse_structured, write_report, ReportFormat};
