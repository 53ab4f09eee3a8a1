//! Experiment engine behind the `freefield` binary: resolves a
//! configuration (defaults ← config file ← CLI flags), runs one of the
//! registered suites across seeded replicas, and writes results.json, CSV
//! tables and optional SVG plots. Identical configuration and seed produce
//! byte-identical results.json; wall-clock metadata goes to a separate
//! run_meta.json.

pub mod config;
pub mod experiments;
pub mod report;
pub mod svg;

pub use config::{ConstantPolicy, ExperimentConfig};
pub use report::{CheckResult, ExperimentReport};

use std::process::ExitCode;

#[derive(Debug)]
pub enum RunError {
    UnknownExperiment(String),
    BudgetExceeded(String),
    Failure(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::UnknownExperiment(n) => write!(f, "unknown experiment `{n}`"),
            RunError::BudgetExceeded(m) => write!(f, "resource budget exceeded: {m}"),
            RunError::Failure(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError::Failure(e.into())
    }
}

/// Exit codes: 0 all verdicts pass, 1 verdict failure, 2 unknown
/// experiment, 3 budget exceeded.
pub fn exit_code_for(outcome: &Result<ExperimentReport, RunError>) -> ExitCode {
    match outcome {
        Ok(report) if report.passed() => ExitCode::from(0),
        Ok(_) => ExitCode::from(1),
        Err(RunError::UnknownExperiment(_)) => ExitCode::from(2),
        Err(RunError::BudgetExceeded(_)) => ExitCode::from(3),
        Err(RunError::Failure(_)) => ExitCode::from(1),
    }
}

pub const EXPERIMENTS: &[&str] = &[
    "green-checks",
    "delta-eps-convergence",
    "frac-kernels",
    "stationarity",
    "qv-linearity",
    "she-covariance",
    "fractional-she",
    "boundary-decay",
];

/// Run one experiment and write its artifacts under the configured output
/// directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, RunError> {
    let start = std::time::Instant::now();
    let report = match cfg.experiment.as_str() {
        "green-checks" => experiments::green_checks::run(cfg)?,
        "delta-eps-convergence" => experiments::delta_eps::run(cfg)?,
        "frac-kernels" => experiments::frac_kernels::run(cfg)?,
        "stationarity" => experiments::stationarity::run(cfg)?,
        "qv-linearity" => experiments::qv::run(cfg)?,
        "she-covariance" => experiments::she_cov::run(cfg)?,
        "fractional-she" => experiments::frac_she::run(cfg)?,
        "boundary-decay" => experiments::boundary::run(cfg)?,
        other => return Err(RunError::UnknownExperiment(other.to_string())),
    };
    report::write_artifacts(cfg, &report, start.elapsed())?;
    Ok(report)
}
