//! Experiment configuration: defaults overlaid by a flat key = value config
//! file, overlaid by CLI flags. The fully resolved configuration is echoed
//! into the output directory and hashed into results.json.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use freefield::domain::DomainSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantPolicy {
    /// Quadratic-exactness constant d(d+2)|D|/V_d (and the fractional
    /// closed form for α < 1).
    Analytic,
    /// Least-squares fit over a bump battery.
    Empirical,
    /// The paper's exit-time constant in the -Δ convention, 2d|D|/V_d.
    Paper,
}

impl ConstantPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "analytic" => ConstantPolicy::Analytic,
            "empirical" => ConstantPolicy::Empirical,
            "paper" => ConstantPolicy::Paper,
            other => bail!("unknown constant policy `{other}` (analytic|empirical|paper)"),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConstantPolicy::Analytic => "analytic",
            ConstantPolicy::Empirical => "empirical",
            ConstantPolicy::Paper => "paper",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub domain: String,
    pub grid_n: usize,
    pub eps_list: Vec<f64>,
    pub alpha: f64,
    pub constant: ConstantPolicy,
    pub replicas: usize,
    /// Target number of events per trajectory (the horizon is derived from
    /// the clock rate).
    pub events_per_run: f64,
    pub seed: u64,
    pub out_root: PathBuf,
    pub plots: bool,
    /// Budget on events × replicas for dynamics suites.
    pub budget: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: String::new(),
            domain: "unit-square".into(),
            grid_n: 64,
            eps_list: vec![0.1],
            alpha: 0.5,
            constant: ConstantPolicy::Analytic,
            replicas: 500,
            events_per_run: 200.0,
            seed: 7,
            out_root: PathBuf::from("out"),
            plots: false,
            budget: 1e7,
        }
    }
}

impl ExperimentConfig {
    pub fn domain_spec(&self) -> Result<DomainSpec> {
        Ok(match self.domain.as_str() {
            "unit-square" => DomainSpec::unit_square(),
            "unit-cube" => DomainSpec::unit_cube(),
            "unit-disk" => DomainSpec::unit_disk(),
            "unit-ball" => DomainSpec::ball(3, 1.0)?,
            other => bail!("unknown domain `{other}` (unit-square|unit-cube|unit-disk|unit-ball)"),
        })
    }

    /// Apply `key = value` pairs from a flat config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value", lineno + 1))?;
            self.apply_kv(key.trim(), value.trim())
                .with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }

    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "domain" => self.domain = value.to_string(),
            "grid_n" => self.grid_n = value.parse()?,
            "eps" => {
                self.eps_list = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()?;
            }
            "alpha" => self.alpha = value.parse()?,
            "constant" => self.constant = ConstantPolicy::parse(value)?,
            "replicas" => self.replicas = value.parse()?,
            "events" => self.events_per_run = value.parse()?,
            "seed" => self.seed = value.parse()?,
            "out" => self.out_root = PathBuf::from(value),
            "plots" => self.plots = value.parse()?,
            "budget" => self.budget = value.parse()?,
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    /// Canonical flat rendering; this is what gets hashed and echoed.
    pub fn canonical(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("experiment", self.experiment.clone());
        map.insert("domain", self.domain.clone());
        map.insert("grid_n", self.grid_n.to_string());
        map.insert(
            "eps",
            self.eps_list
                .iter()
                .map(|e| format!("{e:.12e}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        map.insert("alpha", format!("{:.12e}", self.alpha));
        map.insert("constant", self.constant.name().to_string());
        map.insert("replicas", self.replicas.to_string());
        map.insert("events", format!("{:.12e}", self.events_per_run));
        map.insert("seed", self.seed.to_string());
        map.insert("plots", self.plots.to_string());
        map.insert("budget", format!("{:.12e}", self.budget));
        map.into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_root.join(&self.experiment)
    }
}
