//! Verdict records and output artifacts.

use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One named check: a measured value against a tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

impl CheckResult {
    /// Pass iff |value| <= tolerance.
    pub fn abs_within(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        CheckResult { check: check.into(), value, tolerance, verdict: value.abs() <= tolerance }
    }

    /// Pass iff value >= bound (tolerance column holds the bound).
    pub fn at_least(check: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckResult { check: check.into(), value, tolerance: bound, verdict: value >= bound }
    }

    /// Pass iff value <= bound.
    pub fn at_most(check: impl Into<String>, value: f64, bound: f64) -> Self {
        CheckResult { check: check.into(), value, tolerance: bound, verdict: value <= bound }
    }

    pub fn boolean(check: impl Into<String>, pass: bool) -> Self {
        CheckResult {
            check: check.into(),
            value: if pass { 1.0 } else { 0.0 },
            tolerance: 1.0,
            verdict: pass,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_hash: String,
    pub checks: Vec<CheckResult>,
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
    #[serde(skip)]
    pub figures: Vec<(String, String)>,
}

impl ExperimentReport {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        ExperimentReport {
            experiment: cfg.experiment.clone(),
            config_hash: cfg.config_hash(),
            checks: Vec::new(),
            tables: Vec::new(),
            figures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict)
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }

    pub fn table(&mut self, name: impl Into<String>, csv: String) {
        self.tables.push((name.into(), csv));
    }

    pub fn figure(&mut self, name: impl Into<String>, svg: String) {
        self.figures.push((name.into(), svg));
    }
}

/// Write results.json, per-suite CSV tables, optional SVG figures, the
/// resolved configuration and the (timestamped) run metadata.
pub fn write_artifacts(
    cfg: &ExperimentConfig,
    report: &ExperimentReport,
    elapsed: Duration,
) -> Result<()> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;

    let results = serde_json::to_string_pretty(report)?;
    write_atomic(&dir.join("results.json"), &results)?;
    write_atomic(&dir.join("resolved_config.txt"), &cfg.canonical())?;

    for (name, csv) in &report.tables {
        write_atomic(&dir.join(format!("{name}.csv")), csv)?;
    }
    if cfg.plots {
        for (name, svg) in &report.figures {
            write_atomic(&dir.join(format!("{name}.svg")), svg)?;
        }
    }

    // Timestamps deliberately live outside results.json so reruns with the
    // same config and seed are byte-identical there.
    let unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = format!(
        "{{\n  \"unix_time\": {unix},\n  \"runtime_seconds\": {:.3}\n}}\n",
        elapsed.as_secs_f64()
    );
    write_atomic(&dir.join("run_meta.json"), &meta)?;
    Ok(())
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Small CSV builder for tables.
pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv { lines: vec![header.join(",")] }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}
