//! Experiment configuration documents.
//!
//! A configuration is a strict JSON object: unknown keys are rejected and
//! every error carries the JSON path of the offending value.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cpsim_core::env::{DistSpec, EnvMode, Role};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Meanfield,
    Simulate,
    Sweep,
    GraphicalCheck,
    TheoryCheck,
    Quasistationary,
}

/// How the horizon of a run depends on `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TMaxRule {
    Fixed(f64),
    /// `t_max = c · ln n`.
    LogMultiple(f64),
    /// `t_max = min(e^{cn}, t_cap)`.
    ExpCap { c: f64, t_cap: f64 },
}

impl Default for TMaxRule {
    fn default() -> Self {
        TMaxRule::LogMultiple(20.0)
    }
}

impl TMaxRule {
    pub fn t_max(&self, n: usize) -> f64 {
        match *self {
            TMaxRule::Fixed(t) => t,
            TMaxRule::LogMultiple(c) => c * (n as f64).ln(),
            TMaxRule::ExpCap { c, t_cap } => (c * n as f64).exp().min(t_cap),
        }
    }
}

/// Initially infected set: every vertex, vertex 0 only, or the first
/// `⌈x n⌉` vertices. Written `full`, `single`, `fraction:x`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum InitRule {
    #[default]
    Full,
    Single,
    Fraction(f64),
}

impl InitRule {
    pub fn vertices(&self, n: usize) -> Vec<usize> {
        match *self {
            InitRule::Full => (0..n).collect(),
            InitRule::Single => vec![0],
            InitRule::Fraction(x) => (0..((x * n as f64).ceil() as usize).min(n)).collect(),
        }
    }
}

impl FromStr for InitRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(InitRule::Full),
            "single" => Ok(InitRule::Single),
            _ => {
                let x = s
                    .strip_prefix("fraction:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| format!("expected full, single or fraction:x, got `{s}`"))?;
                if x > 0.0 && x <= 1.0 {
                    Ok(InitRule::Fraction(x))
                } else {
                    Err(format!("fraction must lie in (0,1], got {x}"))
                }
            }
        }
    }
}

impl fmt::Display for InitRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitRule::Full => f.write_str("full"),
            InitRule::Single => f.write_str("single"),
            InitRule::Fraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

impl TryFrom<String> for InitRule {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<InitRule> for String {
    fn from(r: InitRule) -> Self {
        r.to_string()
    }
}

/// Burn-in and observation window of quasi-stationary runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiWindow {
    pub t_burn: f64,
    pub t_obs: f64,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub rho_spec: DistSpec,
    pub xi_spec: DistSpec,
    pub lambda_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub t_max_rule: TMaxRule,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub env_mode: EnvMode,
    /// Number of environment samples per `n`: 1 is quenched, more is annealed.
    #[serde(default = "one")]
    pub environments: usize,
    #[serde(default)]
    pub init: InitRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quasi: Option<QuasiWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(path: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Invalid { path: path.into(), message: message.to_string() }
}

fn check_grid<T: PartialOrd + Copy>(path: &str, grid: &[T]) -> Result<(), ConfigError> {
    if grid.is_empty() {
        return Err(invalid(path, "empty grid"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid(path, "grid not sorted"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Minimal quenched configuration for one `(n, λ)` cell.
    pub fn single_cell(mode: Mode, rho_spec: DistSpec, xi_spec: DistSpec, n: usize, lambda: f64) -> Self {
        Self {
            mode,
            rho_spec,
            xi_spec,
            lambda_grid: vec![lambda],
            n_grid: vec![n],
            replicas: 1,
            t_max_rule: TMaxRule::default(),
            master_seed: 0,
            env_mode: EnvMode::Iid,
            environments: 1,
            init: InitRule::Full,
            sample_every: None,
            quasi: None,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rho_spec.role != Role::EdgeWeight {
            return Err(invalid("rho_spec.role", "expected edge-weight"));
        }
        if self.xi_spec.role != Role::RecoveryRate {
            return Err(invalid("xi_spec.role", "expected recovery-rate"));
        }
        self.rho_spec.validate().map_err(|e| invalid("rho_spec", e))?;
        self.xi_spec.validate().map_err(|e| invalid("xi_spec", e))?;
        if self.env_mode == EnvMode::Stratified && !self.xi_spec.is_finite() {
            return Err(invalid("env_mode", "stratified mode needs a finite recovery-rate law"));
        }
        check_grid("lambda_grid", &self.lambda_grid)?;
        if let Some(i) = self.lambda_grid.iter().position(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(invalid(format!("lambda_grid[{i}]"), "λ must be positive and finite"));
        }
        check_grid("n_grid", &self.n_grid)?;
        if self.n_grid[0] == 0 {
            return Err(invalid("n_grid[0]", "n must be at least 1"));
        }
        if self.replicas == 0 {
            return Err(invalid("replicas", "need at least one replica"));
        }
        if self.environments == 0 {
            return Err(invalid("environments", "need at least one environment"));
        }
        match self.t_max_rule {
            TMaxRule::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(invalid("t_max_rule.fixed", "horizon must be positive and finite"))
            }
            TMaxRule::LogMultiple(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(invalid("t_max_rule.log-multiple", "multiplier must be positive"))
            }
            TMaxRule::LogMultiple(_) if self.n_grid[0] < 2 => {
                return Err(invalid("n_grid[0]", "log-multiple horizon needs n ≥ 2"))
            }
            TMaxRule::ExpCap { c, t_cap } if !(c > 0.0 && t_cap > 0.0 && t_cap.is_finite()) => {
                return Err(invalid("t_max_rule.exp-cap", "need c > 0 and a finite t_cap > 0"))
            }
            _ => {}
        }
        if let Some(s) = self.sample_every {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("sample_every", "sampling interval must be positive"));
            }
        }
        if let Some(w) = self.quasi {
            if !(w.t_burn >= 0.0 && w.t_burn.is_finite()) {
                return Err(invalid("quasi.t_burn", "burn-in must be finite and non-negative"));
            }
            if !(w.t_obs > 0.0 && w.t_obs.is_finite()) {
                return Err(invalid("quasi.t_obs", "empty observation window"));
            }
        } else if self.mode == Mode::Quasistationary {
            return Err(invalid("quasi", "quasistationary mode needs {t_burn, t_obs}"));
        }
        if self.mode == Mode::Quasistationary && self.env_mode != EnvMode::Stratified {
            return Err(invalid("env_mode", "quasistationary mode needs a stratified environment"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(document: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { "$".to_owned() } else { path }, e.into_inner())
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}
