//! Run configuration: a TOML file with `model`, `train`, `data` and `loss`
//! sections, versioned by a top-level `format_version`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::losses::{WeightMode, DEFAULT_KL_CLAMP};
use crate::model::{MaskMode, ModelConfig, ModelError};
use crate::synth::{distribution_shift_variant, FactorSpec, Shift, SynthError};

pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Syntax or schema error; the message carries the line and column.
    #[error("{0}")]
    Parse(String),
    #[error("format_version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("`{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] SynthError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub loss: LossConfig,
}

/// Model settings; the input width comes from the data section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_blocks: usize,
    #[serde(default = "defaults::hidden")]
    pub block_hidden_dims: Vec<usize>,
    #[serde(default = "defaults::local_dim")]
    pub local_dim: usize,
    #[serde(default = "defaults::hidden")]
    pub fusion_hidden_dims: Vec<usize>,
    #[serde(default = "defaults::global_dim")]
    pub global_dim: usize,
    #[serde(default = "defaults::n_classes")]
    pub n_classes: usize,
    #[serde(default = "defaults::mask_mode")]
    pub mask_mode: MaskMode,
    #[serde(default)]
    pub detach_full_target: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    Cosine,
    #[serde(rename = "step_half_every_5")]
    StepHalfEvery5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    #[serde(default = "defaults::batch_size")]
    pub batch_size: usize,
    #[serde(default = "defaults::scheduler")]
    pub scheduler: Scheduler,
    #[serde(default = "defaults::beta1")]
    pub beta1: f64,
    #[serde(default = "defaults::beta2")]
    pub beta2: f64,
    #[serde(default = "defaults::adam_eps")]
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub mode: WeightMode,
    #[serde(default = "defaults::one")]
    pub alpha: f64,
    #[serde(default = "defaults::one")]
    pub beta: f64,
    #[serde(default = "defaults::yes")]
    pub enable_lil: bool,
    #[serde(default = "defaults::yes")]
    pub enable_gil: bool,
    #[serde(default = "defaults::kl_clamp")]
    pub kl_clamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default = "defaults::data_seed")]
    pub seed: u64,
    #[serde(default = "defaults::n_train")]
    pub n_train: usize,
    #[serde(default = "defaults::n_eval")]
    pub n_val: usize,
    #[serde(default = "defaults::n_eval")]
    pub n_test: usize,
    #[serde(default = "defaults::yes")]
    pub oversample: bool,
    #[serde(default)]
    pub spec: FactorSpec,
    #[serde(default = "default_shift")]
    pub shift: Shift,
}

/// Shift applied to build the held-out "other dataset" split.
pub fn default_shift() -> Shift {
    Shift {
        noise_scale: 1.2,
        signal_scale: 0.8,
        pattern_rotation: 0.3,
        offset: 0.25,
    }
}

mod defaults {
    use super::*;

    pub fn hidden() -> Vec<usize> {
        vec![32]
    }
    pub fn local_dim() -> usize {
        8
    }
    pub fn global_dim() -> usize {
        16
    }
    pub fn n_classes() -> usize {
        2
    }
    pub fn mask_mode() -> MaskMode {
        MaskMode::SharedHeadZeroMask
    }
    pub fn batch_size() -> usize {
        128
    }
    pub fn scheduler() -> Scheduler {
        Scheduler::Cosine
    }
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn adam_eps() -> f64 {
        1e-8
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn yes() -> bool {
        true
    }
    pub fn kl_clamp() -> f64 {
        DEFAULT_KL_CLAMP
    }
    pub fn data_seed() -> u64 {
        20_240_101
    }
    pub fn n_train() -> usize {
        20_000
    }
    pub fn n_eval() -> usize {
        5_000
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            model: ModelSection {
                n_blocks: 4,
                block_hidden_dims: defaults::hidden(),
                local_dim: defaults::local_dim(),
                fusion_hidden_dims: defaults::hidden(),
                global_dim: defaults::global_dim(),
                n_classes: defaults::n_classes(),
                mask_mode: defaults::mask_mode(),
                detach_full_target: false,
            },
            train: TrainConfig {
                lr: 5e-4,
                epochs: 20,
                seed: 0,
                batch_size: defaults::batch_size(),
                scheduler: defaults::scheduler(),
                beta1: defaults::beta1(),
                beta2: defaults::beta2(),
                eps: defaults::adam_eps(),
            },
            data: DataConfig {
                seed: defaults::data_seed(),
                n_train: defaults::n_train(),
                n_val: defaults::n_eval(),
                n_test: defaults::n_eval(),
                oversample: true,
                spec: FactorSpec::default(),
                shift: default_shift(),
            },
            loss: LossConfig {
                mode: WeightMode::Auto,
                alpha: 1.0,
                beta: 1.0,
                enable_lil: true,
                enable_gil: true,
                kl_clamp: DEFAULT_KL_CLAMP,
            },
        }
    }
}

impl RunConfig {
    /// Parses and validates a config file.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        // Check the version before the schema so old files get a clear error.
        if let Ok(table) = text.parse::<toml::Table>() {
            if let Some(v) = table.get("format_version").and_then(|v| v.as_integer()) {
                if v != CONFIG_FORMAT_VERSION as i64 {
                    return Err(ConfigError::Version {
                        found: v as u32,
                        expected: CONFIG_FORMAT_VERSION,
                    });
                }
            }
        }
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_config(&self) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            input_dim: self.data.spec.input_dim(),
            n_blocks: m.n_blocks,
            block_hidden_dims: m.block_hidden_dims.clone(),
            local_dim: m.local_dim,
            fusion_hidden_dims: m.fusion_hidden_dims.clone(),
            global_dim: m.global_dim,
            n_classes: m.n_classes,
            mask_mode: m.mask_mode,
            detach_full_target: m.detach_full_target,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, msg: &str| Err(ConfigError::Invalid { key, msg: msg.into() });
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(ConfigError::Version {
                found: self.format_version,
                expected: CONFIG_FORMAT_VERSION,
            });
        }
        let t = &self.train;
        if !(t.lr > 0.0 && t.lr.is_finite()) {
            return invalid("train.lr", "must be positive");
        }
        if t.epochs == 0 {
            return invalid("train.epochs", "must be >= 1");
        }
        if t.batch_size == 0 {
            return invalid("train.batch_size", "must be >= 1");
        }
        if !(0.0..1.0).contains(&t.beta1) {
            return invalid("train.beta1", "must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&t.beta2) {
            return invalid("train.beta2", "must be in [0, 1)");
        }
        if t.eps.is_nan() || t.eps <= 0.0 {
            return invalid("train.eps", "must be positive");
        }
        let l = &self.loss;
        if !(l.alpha >= 0.0 && l.alpha.is_finite()) {
            return invalid("loss.alpha", "must be >= 0");
        }
        if !(l.beta >= 0.0 && l.beta.is_finite()) {
            return invalid("loss.beta", "must be >= 0");
        }
        if !(l.kl_clamp > 0.0 && l.kl_clamp.is_finite()) {
            return invalid("loss.kl_clamp", "must be positive");
        }
        let d = &self.data;
        if d.n_train < 2 {
            return invalid("data.n_train", "must be >= 2");
        }
        if d.n_val == 0 {
            return invalid("data.n_val", "must be >= 1");
        }
        if d.n_test == 0 {
            return invalid("data.n_test", "must be >= 1");
        }
        d.spec.validate()?;
        distribution_shift_variant(&d.spec, &d.shift)?;
        self.model_config().validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = RunConfig::default().to_toml_string().replace("epochs = 20\n", "");
        let err = RunConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("epochs"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let mut text = RunConfig::default().to_toml_string();
        text = text.replace("[train]\n", "[train]\nlearning_rate = 0.1\n");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        assert!(err.contains("learning_rate"), "{err}");
    }

    #[test]
    fn version_and_value_checks() {
        let text = RunConfig::default().to_toml_string().replace("format_version = 1", "format_version = 7");
        assert!(matches!(
            RunConfig::from_toml_str(&text),
            Err(ConfigError::Version { found: 7, .. })
        ));
        let mut cfg = RunConfig::default();
        cfg.train.epochs = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid { key: "train.epochs", .. })));
        let mut cfg = RunConfig::default();
        cfg.model.n_blocks = 1;
        assert!(cfg.validate().is_err());
    }
}
