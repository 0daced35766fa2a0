use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::combine::Method;
use crate::error::{Error, Result};
use crate::estimate::EstimatorSpec;
use crate::models::ModelSpec;
use crate::product::GridConfig;

/// Tuning for the kernel-product mixture sampler.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpeConfig {
    /// Kernel bandwidth; Silverman's rule averaged over shards and
    /// dimensions when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    /// Gibbs scans; enough to leave `draws` after a 10% burn-in when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
}

/// One experiment: a model, a number of shards, and the methods to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Output subdirectory and report label; `<model>_M<shards>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub shards: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_burnin")]
    pub burnin: usize,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Write chain and combined draws under `samples/`, and draw
    /// inverse-CDF samples from the direct method.
    #[serde(default)]
    pub want_samples: bool,
    /// Keep per-parameter density tables (needed by `plots`).
    #[serde(default)]
    pub keep_densities: bool,
    #[serde(default)]
    pub dpe: DpeConfig,
}

fn default_draws() -> usize {
    50_000
}

fn default_burnin() -> usize {
    5_000
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_seed() -> u64 {
    1
}

impl ExperimentConfig {
    pub fn new(model: ModelSpec, shards: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: None,
            model,
            shards,
            draws: default_draws(),
            burnin: default_burnin(),
            estimator: EstimatorSpec::default(),
            grid: GridConfig::default(),
            methods: default_methods(),
            seed: default_seed(),
            output: None,
            want_samples: false,
            keep_densities: false,
            dpe: DpeConfig::default(),
        }
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}_M{}", self.model.name(), self.shards))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.shards == 0 {
            return Err(Error::Config("shards must be at least 1".into()));
        }
        if self.shards > self.model.data_size {
            return Err(Error::Config(format!(
                "{} shards for {} observations",
                self.shards, self.model.data_size
            )));
        }
        if self.draws == 0 || self.draws <= self.burnin {
            return Err(Error::Config(format!(
                "draws ({}) must be positive and exceed burnin ({})",
                self.draws, self.burnin
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        let mut sorted = self.methods.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.methods.len() {
            return Err(Error::Config("methods must not repeat".into()));
        }
        if let Some(label) = &self.name {
            if label.is_empty() || label.contains(['/', '\\']) || label == "." || label == ".." {
                return Err(Error::Config(format!("`{label}` is not a usable experiment name")));
            }
        }
        if let Some(h) = self.dpe.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::Config(format!("dpe bandwidth {h} must be positive")));
            }
        }
        if let Some(n) = self.dpe.iterations {
            if n - n / 10 < self.draws {
                return Err(Error::Config(format!(
                    "{n} dpe iterations leave fewer than {} draws after burn-in",
                    self.draws
                )));
            }
        }
        self.estimator.validate()?;
        self.grid.validate()?;
        Ok(())
    }

    /// Estimator with the model's support filled in when none was given.
    pub fn effective_estimator(&self) -> EstimatorSpec {
        let mut spec = self.estimator.clone();
        if spec.support.is_none() {
            spec.support = Some(self.model.support());
        }
        spec
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub keep_densities: bool,
}

/// A config file: a single experiment, or `{"experiments": [...]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub experiments: Vec<ExperimentConfig>,
    pub output: Option<PathBuf>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let value: Value = serde_json::from_str(text)?;
        let (experiments, output) = match value {
            Value::Object(mut map) if map.contains_key("experiments") => {
                let list = map.remove("experiments").unwrap_or_default();
                let output = map
                    .remove("output")
                    .map(serde_json::from_value::<PathBuf>)
                    .transpose()?;
                if let Some(key) = map.keys().next() {
                    return Err(Error::Config(format!("unknown top-level key `{key}`")));
                }
                (serde_json::from_value::<Vec<ExperimentConfig>>(list)?, output)
            }
            other => {
                let single: ExperimentConfig = serde_json::from_value(other)?;
                let output = single.output.clone();
                (vec![single], output)
            }
        };
        if experiments.is_empty() {
            return Err(Error::Config("config lists no experiments".into()));
        }
        for e in &experiments {
            e.validate()?;
        }
        let mut labels: Vec<String> = experiments.iter().map(ExperimentConfig::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("experiment names must be unique".into()));
        }
        Ok(ConfigFile { experiments, output })
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    /// Apply overrides and resolve the output directory.
    pub fn with_overrides(mut self, overrides: &Overrides) -> (ConfigFile, PathBuf) {
        for e in &mut self.experiments {
            if let Some(seed) = overrides.seed {
                e.seed = seed;
            }
            if overrides.keep_densities {
                e.keep_densities = true;
            }
        }
        let out = overrides
            .out
            .clone()
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("results"));
        (self, out)
    }
}
