//! Experiment configuration: JSON manifests layered over built-in defaults,
//! with `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use splitiv_core::pipeline::PipelineConfig;
use splitiv_core::splitfilters::Mode;

use crate::error::{HarnessError, Result};

/// Noise variance used when none is configured.
pub fn default_eta(mode: Mode) -> f64 {
    match mode {
        Mode::Continuous => 0.1,
        Mode::Discrete => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub pipeline: PipelineConfig,
    /// Measurement noise variance; `None` picks the mode's default.
    pub eta: Option<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub bootstrap_resamples: usize,
    pub kde_grid: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: PipelineConfig::default(),
            eta: None,
            trials: 2000,
            master_seed: 1,
            bootstrap_resamples: 1000,
            kde_grid: 256,
        }
    }
}

/// Short names accepted in manifests and overrides.
const ALIASES: &[(&str, &str)] = &[
    ("N", "window"),
    ("seed", "master_seed"),
    ("f", "forcing_freq"),
];

fn canonical(key: &str) -> &str {
    ALIASES
        .iter()
        .find(|(alias, _)| *alias == key)
        .map_or(key, |(_, name)| name)
}

impl ExperimentConfig {
    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| default_eta(self.pipeline.mode))
    }

    pub fn mode(&self) -> Mode {
        self.pipeline.mode
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        let eta = self.eta();
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(HarnessError::Config(format!(
                "eta must be non-negative and finite, got {eta}"
            )));
        }
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be positive".into()));
        }
        if self.bootstrap_resamples < splitiv_core::stats::MIN_RESAMPLES {
            return Err(HarnessError::Config(format!(
                "bootstrap_resamples must be at least {}",
                splitiv_core::stats::MIN_RESAMPLES
            )));
        }
        if self.kde_grid < 2 {
            return Err(HarnessError::Config("kde_grid must be at least 2".into()));
        }
        Ok(())
    }

    /// Defaults overlaid with the fields present in a JSON object.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(fields) = value else {
            return Err(HarnessError::Config(
                "manifest must be a JSON object".into(),
            ));
        };
        let mut config = ExperimentConfig::default();
        config.merge(fields)?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies `key=value` overrides. Values are read as JSON when they parse
    /// and as bare strings otherwise, so `mode=discrete` and `x0=[1,2,3]` both work.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        let mut fields = Map::new();
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item.split_once('=').ok_or_else(|| {
                HarnessError::Config(format!("override `{item}` is not key=value"))
            })?;
            let value = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
            fields.insert(key.trim().to_string(), value);
        }
        self.merge(fields)
    }

    fn merge(&mut self, fields: Map<String, Value>) -> Result<()> {
        let Value::Object(mut current) = serde_json::to_value(&*self)? else {
            unreachable!("config serializes to an object");
        };
        for (key, value) in fields {
            let key = canonical(&key).to_string();
            if !current.contains_key(&key) {
                return Err(HarnessError::Config(format!("unknown field `{key}`")));
            }
            current.insert(key, value);
        }
        *self = serde_json::from_value(Value::Object(current))
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}
