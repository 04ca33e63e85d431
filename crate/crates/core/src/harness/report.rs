//! Report serialization: a flat CSV (one row per trial plus a summary block)
//! and a structured JSON document carrying every per-iteration trace.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::montecarlo::MonteCarloReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::input(format!("unknown report format `{other}`"))),
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv(report: &MonteCarloReport) -> String {
    let mut out = String::from("trial,seed,stopped_at,budget,n_blocks,correct\n");
    for d in &report.trial_reports {
        let r = &d.report;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            d.trial,
            d.seed,
            r.stopped_at,
            r.budget,
            r.partition.num_blocks(),
            r.correct
        )
        .expect("writing to a String");
    }
    let summary: [(&str, String); 16] = [
        ("trials", report.trials.to_string()),
        ("delta", report.delta.to_string()),
        ("clusters", report.clusters.to_string()),
        ("mode", report.mode.to_string()),
        ("correct", report.correct_count.to_string()),
        ("incorrect", report.incorrect_count.to_string()),
        ("cap_exceeded", report.cap_exceeded_count.to_string()),
        ("error_rate", report.error_rate.to_string()),
        ("budget_min", report.budget.min.to_string()),
        ("budget_median", report.budget.median.to_string()),
        ("budget_p90", report.budget.p90.to_string()),
        ("budget_max", report.budget.max.to_string()),
        ("s_star_squared", opt(report.oracle.s_star_squared)),
        ("k_star", opt(report.oracle.k_star)),
        ("tau_bound", opt(report.oracle.tau_bound)),
        ("within_bound_fraction", opt(report.within_bound_fraction)),
    ];
    out.push_str("\nmetric,value\n");
    for (k, v) in summary {
        writeln!(out, "{k},{v}").expect("writing to a String");
    }
    out
}

/// Renders the report. Output is a pure function of the report.
pub fn emit_report(report: &MonteCarloReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => csv(report),
        ReportFormat::Structured => {
            let mut s = serde_json::to_string_pretty(report).expect("report is always serializable");
            s.push('\n');
            s
        }
    }
}

pub fn parse_structured(text: &str) -> Result<MonteCarloReport> {
    serde_json::from_str(text).map_err(|e| Error::input(format!("malformed structured report: {e}")))
}

/// Writes the rendered report to `path`, or stdout when `path` is `None`.
pub fn write_report(report: &MonteCarloReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = emit_report(report, format);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}
