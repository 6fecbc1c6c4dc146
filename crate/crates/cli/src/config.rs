//! Experiment configuration files.
//!
//! ```toml
//! experiment = "ifs-density"
//! seed = 7
//!
//! [params]
//! radius = 0.00390625
//!
//! [output]
//! dir = "out"
//! csv = true
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub seed: u64,
    /// Preset parameters; unknown keys are rejected by the preset.
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub json: bool,
    pub csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, json: true, csv: true }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        ExperimentConfig { experiment: experiment.into(), seed: 0, params: toml::Table::new(), output: OutputConfig::default() }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config("", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets `params.<key>` from anything serializable to TOML.
    pub fn with_param<T: Serialize>(mut self, key: &str, value: T) -> Self {
        let v = toml::Value::try_from(value).expect("parameter serializes to TOML");
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Typed preset parameters; errors carry the offending `params.*` path.
pub fn parse_params<P: DeserializeOwned>(table: &toml::Table) -> Result<P, CliError> {
    P::deserialize(toml::Value::Table(table.clone())).map_err(|e| {
        let msg = e.message().to_string();
        let field = msg.split('`').nth(1).filter(|_| msg.starts_with("unknown field")).map(|f| format!("params.{f}"));
        CliError::config(field.as_deref().unwrap_or("params"), msg)
    })
}

// Range checks shared by the presets.

pub fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(&format!("params.{path}"), format!("must be positive, got {v}")))
    }
}

pub fn non_negative(path: &str, v: f64) -> Result<(), CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::config(&format!("params.{path}"), format!("must be non-negative, got {v}")))
    }
}

pub fn in_open_unit(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(&format!("params.{path}"), format!("must lie in (0, 1), got {v}")))
    }
}

pub fn at_least(path: &str, v: usize, min: usize) -> Result<(), CliError> {
    if v >= min {
        Ok(())
    } else {
        Err(CliError::config(&format!("params.{path}"), format!("must be at least {min}, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Deserialize)]
    #[serde(deny_unknown_fields)]
    struct P {
        #[allow(dead_code)]
        eps: f64,
    }

    #[test]
    fn unknown_keys_are_rejected_with_path() {
        assert!(ExperimentConfig::parse("experiment = \"x\"\ncolour = 1\n").is_err());
        let cfg = ExperimentConfig::parse("experiment = \"x\"\n[params]\neps = 0.1\nepz = 2\n").unwrap();
        match parse_params::<P>(&cfg.params) {
            Err(CliError::ConfigInvalid { path, .. }) => assert_eq!(path, "params.epz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn defaults() {
        let cfg = ExperimentConfig::parse("experiment = \"recurrence-fraction\"\n").unwrap();
        assert_eq!(cfg.seed, 0);
        assert!(cfg.output.json && cfg.output.csv && cfg.output.dir.is_none());
    }
}
