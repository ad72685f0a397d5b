//! Run configuration read from a TOML file, with `section.key=value`
//! overrides applied before validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{Activation, AggregatorKind};
use crate::error::{Error, Result};
use crate::evaluation::ForestConfig;
use crate::features::{FeatureConfig, FeatureDomain};
use crate::rng::RngSeed;
use crate::synth::SynthConfig;
use crate::topology::TopologyConfig;
use crate::training::{ModelSpec, ParameterMode, TrainConfig};

/// Keys every configuration must supply.
pub const REQUIRED_KEYS: [&str; 13] = [
    "seed",
    "features.domain",
    "features.inner_windows",
    "features.bins",
    "model.k",
    "model.aggregator",
    "model.theta_mode",
    "model.psi_mode",
    "training.epochs",
    "training.learning_rate",
    "training.batch_size",
    "topology.eta_ratio",
    "forest.n_trees",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeaturesSection {
    pub domain: FeatureDomain,
    pub inner_windows: usize,
    pub bins: usize,
}

fn default_activation() -> Activation {
    Activation::Relu
}

fn default_cn_epsilon() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k: usize,
    pub aggregator: AggregatorKind,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    pub theta_mode: ParameterMode,
    pub psi_mode: ParameterMode,
    #[serde(default = "default_cn_epsilon")]
    pub cn_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

fn default_regularization() -> f64 {
    TopologyConfig::default().regularization
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub eta_ratio: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default)]
    pub use_magnitude: bool,
}

fn default_min_leaf() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSection {
    pub n_trees: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default)]
    pub features_per_split: Option<usize>,
    #[serde(default = "default_min_leaf")]
    pub min_leaf: usize,
    /// Cap on class-0 training samples per class-1 sample.
    #[serde(default)]
    pub subsample_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_nodes: usize,
    pub t_len: usize,
    pub n_samples_per_state: usize,
    pub sampling_rate_hz: f64,
    pub ar_coefficient: f64,
    pub noise_std: f64,
    pub coupled_nodes: Vec<usize>,
    pub frequency_hz: f64,
    pub coupling: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            n_nodes: d.n_nodes,
            t_len: d.t_len,
            n_samples_per_state: d.n_samples_per_state,
            sampling_rate_hz: d.sampling_rate_hz,
            ar_coefficient: d.ar_coefficient,
            noise_std: d.noise_std,
            coupled_nodes: d.coupled_nodes,
            frequency_hz: d.frequency_hz,
            coupling: d.coupling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub n_values: Vec<usize>,
    /// Training-set sizes `I` to train with before timing inference.
    pub train_sizes: Vec<usize>,
    /// Samples timed per configuration.
    pub n_infer: usize,
    /// Timing repetitions; the fastest is reported.
    pub repeats: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            n_values: vec![5, 15, 25, 50, 75],
            train_sizes: vec![10],
            n_infer: 20,
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: RngSeed,
    pub features: FeaturesSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub topology: TopologySection,
    pub forest: ForestSection,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub benchmark: BenchmarkSection,
}

fn lookup<'a>(table: &'a toml::Table, dotted: &str) -> Option<&'a toml::Value> {
    let mut parts = dotted.split('.');
    let mut value = table.get(parts.next()?)?;
    for p in parts {
        value = value.as_table()?.get(p)?;
    }
    Some(value)
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies one `section.key=value` override.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("invalid override key '{key}'")));
    }
    let mut current = table;
    for p in &parts[..parts.len() - 1] {
        let entry = current
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override key '{key}': '{p}' is not a section")))?;
    }
    current.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text after applying overrides; every missing required key
    /// is reported at once.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("invalid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let missing: Vec<String> = REQUIRED_KEYS
            .iter()
            .filter(|k| lookup(&table, k).is_none())
            .map(|k| k.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingConfigKeys(missing));
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        self.topology_config().validate()?;
        self.forest_config().validate()?;
        if self.training.batch_size == 0 {
            return Err(Error::Config("training.batch_size must be at least 1".into()));
        }
        if !(self.training.learning_rate >= 0.0) {
            return Err(Error::Config("training.learning_rate must be non-negative".into()));
        }
        if self.model.k == 0 {
            return Err(Error::Config("model.k must be at least 1".into()));
        }
        if self.features.domain == FeatureDomain::Time {
            for (name, mode) in [("theta_mode", self.model.theta_mode), ("psi_mode", self.model.psi_mode)] {
                if mode == ParameterMode::DiagonalRepeated {
                    return Err(Error::ModeUnavailable(format!(
                        "model.{name} = diagonal_repeated is only defined in the frequency domain"
                    )));
                }
            }
        }
        if let Some(r) = self.forest.subsample_ratio {
            if !(r > 0.0) {
                return Err(Error::Config("forest.subsample_ratio must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn feature_config(&self, sampling_rate_hz: f64) -> FeatureConfig {
        match self.features.domain {
            FeatureDomain::Time => FeatureConfig::time(sampling_rate_hz),
            FeatureDomain::Frequency => {
                FeatureConfig::frequency(self.features.inner_windows, self.features.bins, sampling_rate_hz)
            }
        }
    }

    pub fn model_spec(&self, t_len: usize, sampling_rate_hz: f64) -> ModelSpec {
        ModelSpec {
            feature: self.feature_config(sampling_rate_hz),
            t_len,
            k: self.model.k,
            aggregator: self.model.aggregator,
            activation: self.model.activation,
            theta_mode: self.model.theta_mode,
            psi_mode: self.model.psi_mode,
            cn_epsilon: self.model.cn_epsilon,
            theta_scale: 1.0,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.training.epochs,
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            seed: self.seed.derive(1),
        }
    }

    pub fn topology_config(&self) -> TopologyConfig {
        TopologyConfig {
            eta_ratio: self.topology.eta_ratio,
            regularization: self.topology.regularization,
            use_magnitude: self.topology.use_magnitude,
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.forest.n_trees,
            max_depth: self.forest.max_depth,
            features_per_split: self.forest.features_per_split,
            min_leaf: self.forest.min_leaf,
            seed: self.seed.derive(2),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            n_nodes: s.n_nodes,
            t_len: s.t_len,
            n_samples_per_state: s.n_samples_per_state,
            sampling_rate_hz: s.sampling_rate_hz,
            ar_coefficient: s.ar_coefficient,
            noise_std: s.noise_std,
            coupled_nodes: s.coupled_nodes.clone(),
            frequency_hz: s.frequency_hz,
            coupling: s.coupling,
            seed: self.seed.derive(3),
        }
    }
}

/// A complete configuration with the documented defaults.
pub const DEFAULT_CONFIG: &str = r#"seed = 7

[features]
domain = "time"
inner_windows = 3
bins = 79

[model]
k = 1
aggregator = "mean"
activation = "relu"
theta_mode = "full"
psi_mode = "full"

[training]
epochs = 2
learning_rate = 0.01
batch_size = 10

[topology]
eta_ratio = 0.5

[forest]
n_trees = 200
subsample_ratio = 10.0
"#;
