use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kabc_core::harness::{
    load_config, run_trial, run_trials, write_report, ExperimentConfig, OracleSummary, ReportFormat,
};
use kabc_core::{Bandit, Error, Result};

#[derive(Parser)]
#[command(name = "kabc", version, about = "Kernel active bandit clustering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and print its report.
    Run(Opts),
    /// Run the full Monte Carlo experiment.
    Montecarlo(Opts),
    /// Print s_*², k_* and the budget bound for the configured environment.
    Snr(Opts),
    /// Check a config file without running anything.
    Validate(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Structured,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Structured => ReportFormat::Structured,
        }
    }
}

#[derive(Args)]
struct Opts {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override the root seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the number of trials.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
}

impl Opts {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            if trials == 0 {
                return Err(Error::Config {
                    path: "--trials".into(),
                    message: "must be at least 1".into(),
                });
            }
            config.trials = trials;
        }
        if let Some(workers) = self.workers {
            if workers == 0 {
                return Err(Error::Config {
                    path: "--workers".into(),
                    message: "must be at least 1".into(),
                });
            }
            config.workers = Some(workers);
        }
        Ok(config)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(opts) => {
            let config = opts.load()?;
            let digest = run_trial(&config, 0)?;
            let text = match opts.format {
                Format::Structured => {
                    serde_json::to_string_pretty(&digest).expect("report is serializable") + "\n"
                }
                Format::Csv => {
                    let r = &digest.report;
                    format!(
                        "trial,seed,stopped_at,budget,n_blocks,correct\n{},{},{},{},{},{}\n",
                        digest.trial,
                        digest.seed,
                        r.stopped_at,
                        r.budget,
                        r.partition.num_blocks(),
                        r.correct
                    )
                }
            };
            emit(&text, opts.out.as_deref())
        }
        Command::Montecarlo(opts) => {
            let config = opts.load()?;
            let report = run_trials(&config)?;
            write_report(&report, opts.format.into(), opts.out.as_deref())
        }
        Command::Snr(opts) => {
            let config = opts.load()?;
            let oracle = OracleSummary::compute(&config)?;
            let text = match opts.format {
                Format::Structured => {
                    serde_json::to_string_pretty(&oracle).expect("oracle is serializable") + "\n"
                }
                Format::Csv => {
                    let show = |v: Option<String>| v.unwrap_or_else(|| "undefined".into());
                    format!(
                        "metric,value\nn_arms,{}\nclusters,{}\ns_star_squared,{}\nk_star,{}\ntau_bound,{}\n",
                        config.environment.num_arms(),
                        config.environment.num_clusters(),
                        show(oracle.s_star_squared.map(|v| v.to_string())),
                        show(oracle.k_star.map(|v| v.to_string())),
                        show(oracle.tau_bound.map(|v| v.to_string())),
                    )
                }
            };
            emit(&text, opts.out.as_deref())
        }
        Command::Validate(opts) => {
            let config = opts.load()?;
            let env = &config.environment;
            emit(
                &format!(
                    "ok: {} arms, {} true clusters, K = {}, truth {}\n",
                    env.num_arms(),
                    env.num_clusters(),
                    config.clusters,
                    env.true_partition()
                ),
                opts.out.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
