//! Run configuration file: TOML, or JSON with the same schema.
//!
//! ```toml
//! output = "out"
//!
//! [system]
//! numerology = 1
//! carrier_frequency = 4e9
//! subcarrier_spacing = 30e3
//! fft_size = 4096
//! cp_len = 288
//! n_rb = 273
//!
//! [[patterns]]
//! kind = "ddrs"
//! comb = 7
//!
//! [noise.snr]
//! mode = "link-budget"
//!
//! [experiment]
//! distances = [100.0, 200.0]
//! velocities = [10.0]
//! slot_counts = [1, 2]
//! trials = 100
//! master_seed = 7
//! ```
//!
//! Every section is optional; missing sections take the defaults of the
//! corresponding types. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{CpPolicy, NoiseModel, RcsModel};
use crate::error::{Error, Result};
use crate::estimators::EstimatorConfig;
use crate::experiments::{ExperimentSpec, Method, ReceiverWindow};
use crate::params::SystemConfig;
use crate::patterns::PatternSpec;

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_n_per() -> Vec<usize> {
    vec![16, 256, 4096, 65536]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoOptions {
    /// Periodogram sizes listed in the resolution table.
    #[serde(default = "default_n_per")]
    pub n_per: Vec<usize>,
    /// Range offset of the receiver window (s).
    #[serde(default)]
    pub tau_r: f64,
}

impl Default for InfoOptions {
    fn default() -> Self {
        Self {
            n_per: default_n_per(),
            tau_r: 0.0,
        }
    }
}

/// Sweep axes and Monte Carlo options.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default)]
    pub distances: Option<Vec<f64>>,
    #[serde(default)]
    pub velocities: Option<Vec<f64>>,
    #[serde(default)]
    pub slot_counts: Vec<usize>,
    #[serde(default)]
    pub methods: Option<Vec<Method>>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub window: ReceiverWindow,
    #[serde(default)]
    pub cp_policy: Option<CpPolicy>,
    #[serde(default)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<PatternSpec>,
    #[serde(default = "NoiseModel::link_budget")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub rcs: RcsModel,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub experiment: SweepAxes,
    #[serde(default)]
    pub info: InfoOptions,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_patterns() -> Vec<PatternSpec> {
    vec![PatternSpec::full_slot(1)]
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            patterns: default_patterns(),
            noise: NoiseModel::link_budget(),
            rcs: RcsModel::default(),
            estimator: EstimatorConfig::default(),
            experiment: SweepAxes::default(),
            info: InfoOptions::default(),
            output: default_output(),
        }
    }
}

impl RunConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| {
                Error::InvalidConfig(format!("line {} column {}: {e}", e.line(), e.column()))
            })?
        } else {
            toml::from_str(text)
                .map_err(|e| Error::InvalidConfig(e.to_string().trim_end().to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.estimator.validate()?;
        if self.patterns.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one pattern is required".into(),
            ));
        }
        for p in &self.patterns {
            p.generate(&self.system)
                .map_err(|e| Error::InvalidConfig(format!("pattern {p:?}: {e}")))?;
        }
        if self.info.n_per.iter().any(|&n| n < 2) {
            return Err(Error::InvalidConfig(
                "info.n_per entries must be at least 2".into(),
            ));
        }
        self.experiment_spec().validate(&self.system)
    }

    pub fn experiment_spec(&self) -> ExperimentSpec {
        let d = ExperimentSpec::default();
        let a = &self.experiment;
        ExperimentSpec {
            distances: a.distances.clone().unwrap_or(d.distances),
            velocities: a.velocities.clone().unwrap_or(d.velocities),
            slot_counts: a.slot_counts.clone(),
            patterns: self.patterns.clone(),
            methods: a.methods.clone().unwrap_or(d.methods),
            trials: a.trials.unwrap_or(d.trials),
            master_seed: a.master_seed,
            noise: self.noise,
            rcs: self.rcs,
            estimator: self.estimator,
            window: a.window,
            cp_policy: a.cp_policy.unwrap_or(d.cp_policy),
            confidence: a.confidence.unwrap_or(d.confidence),
        }
    }
}
