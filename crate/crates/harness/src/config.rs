//! Experiment configuration: a flat TOML document.
//!
//! ```toml
//! theory = "kg"              # kg | schrodinger
//! experiment = "omega-check" # evolve | omega-check | darboux-check | bracket-check | action-residual
//! n = 64
//! seed = 42
//! ```
//!
//! Omitted keys take the defaults of [`ExperimentConfig::new`].

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use covlab_core::SignLedger;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryKind {
    Kg,
    Schrodinger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evolution {
    Spectral,
    Stepped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Evolve,
    OmegaCheck,
    DarbouxCheck,
    BracketCheck,
    ActionResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LedgerFlag {
    #[default]
    Resolved,
    #[serde(rename = "paper-printed", alias = "paper")]
    #[value(name = "paper", alias = "paper-printed")]
    Paper,
}

impl LedgerFlag {
    pub fn ledger(self) -> SignLedger {
        match self {
            LedgerFlag::Resolved => SignLedger::Resolved,
            LedgerFlag::Paper => SignLedger::PaperPrinted,
        }
    }
}

macro_rules! display_kebab {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = toml::Value::try_from(self).map_err(|_| fmt::Error)?;
                f.write_str(s.as_str().unwrap_or_default())
            }
        }
    )*};
}

display_kebab!(TheoryKind, Evolution, ExperimentKind, Format, LedgerFlag);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub theory: TheoryKind,
    pub experiment: ExperimentKind,
    #[serde(default = "defaults::dim")]
    pub dim: usize,
    #[serde(default = "defaults::n")]
    pub n: usize,
    #[serde(default = "defaults::length")]
    pub length: f64,
    #[serde(default = "defaults::mass")]
    pub mass: f64,
    #[serde(default = "defaults::evolution")]
    pub evolution: Evolution,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::steps")]
    pub steps: usize,
    #[serde(default = "defaults::times")]
    pub times: Vec<f64>,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub ledger: LedgerFlag,
}

mod defaults {
    use super::*;

    pub fn dim() -> usize {
        1
    }
    pub fn n() -> usize {
        64
    }
    pub fn length() -> f64 {
        2.0 * PI
    }
    pub fn mass() -> f64 {
        1.0
    }
    pub fn evolution() -> Evolution {
        Evolution::Spectral
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn steps() -> usize {
        1000
    }
    pub fn times() -> Vec<f64> {
        (0..=10).map(f64::from).collect()
    }
    pub fn seed() -> u64 {
        42
    }
}

impl ExperimentConfig {
    /// 1-D, `n = 64`, `L = 2π`, `m = 1`, spectral evolution, `dt = 1e-3` for 1000
    /// steps, times `0, 1, …, 10`, seed 42, CSV output, resolved ledger.
    pub fn new(theory: TheoryKind, experiment: ExperimentKind) -> Self {
        Self {
            theory,
            experiment,
            dim: defaults::dim(),
            n: defaults::n(),
            length: defaults::length(),
            mass: defaults::mass(),
            evolution: defaults::evolution(),
            dt: defaults::dt(),
            steps: defaults::steps(),
            times: defaults::times(),
            seed: defaults::seed(),
            output: None,
            format: Format::Csv,
            ledger: LedgerFlag::Resolved,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |field, reason: &str| Err(ConfigError::Invalid { field, reason: reason.to_string() });
        if !(1..=3).contains(&self.dim) {
            return invalid("dim", "must be 1, 2 or 3");
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return invalid("n", "must be a power of two, at least 2");
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return invalid("length", "must be positive");
        }
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return invalid("mass", "must be non-negative");
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid("dt", "must be positive");
        }
        if self.seed > i64::MAX as u64 {
            return invalid("seed", "must fit in a signed 64-bit TOML integer");
        }
        if self.times.is_empty() || self.times.iter().any(|t| !t.is_finite()) {
            return invalid("times", "must be a non-empty list of finite times");
        }
        Ok(())
    }

    /// Label used in report rows, e.g. `kg/evolve/stepped`.
    pub fn label(&self) -> String {
        let mut label = format!("{}/{}", self.theory, self.experiment);
        if self.experiment == ExperimentKind::Evolve {
            label = format!("{label}/{}", self.evolution);
        }
        if self.ledger == LedgerFlag::Paper {
            label.push_str("/paper-ledger");
        }
        label
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    ExperimentConfig::from_toml(&text)
}
