//! Run configuration: one TOML file drives every command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use trivote::corpus::ColumnMapping;
use trivote::encoders::{Encoder, EncoderRegistry, HashEncoder, PrecomputedEncoder};
use trivote::evaluation::Averaging;
use trivote::models::{BiLstmConfig, ConcatPairConfig, Optimizer, TrainConfig};

fn default_seed() -> u64 {
    42
}

/// Parsed run configuration.
///
/// Relative paths are resolved against the directory containing the config
/// file, so a config checked into its run directory keeps working from any
/// working directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed. Models One, Two, and Three train with `seed`, `seed+1`,
    /// and `seed+2`; the train/validation split uses `seed`.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: PathsSection,
    #[serde(default)]
    pub columns: ColumnMapping,
    /// Encoders to register beside the builtin `hash-test`, keyed by name.
    #[serde(default)]
    pub encoders: BTreeMap<String, EncoderConfig>,
    pub model_one: ConcatPairConfig,
    pub model_two: ConcatPairConfig,
    pub model_three: BiLstmConfig,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Labeled training TSV.
    pub train: PathBuf,
    /// TSV to predict on and to read gold labels from during evaluation.
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Output directory; created on demand.
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum EncoderConfig {
    /// Deterministic hash encoder; needs no files.
    Hash {
        #[serde(default = "EncoderConfig::default_dim")]
        dim: usize,
        #[serde(default = "EncoderConfig::default_max_tokens")]
        max_tokens: usize,
    },
    /// Embedding dump exported offline; see the precomputed store format.
    Precomputed { dir: PathBuf },
}

impl EncoderConfig {
    fn default_dim() -> usize {
        64
    }

    fn default_max_tokens() -> usize {
        128
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub optimizer: Optimizer,
    pub fine_tune_encoders: bool,
    /// Share of the training file held out for validation, in (0, 1).
    pub validation_fraction: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let tc = TrainConfig::default();
        TrainingSection {
            epochs: tc.epochs,
            batch_size: tc.batch_size,
            learning_rate: tc.learning_rate,
            early_stop_patience: tc.early_stop_patience,
            optimizer: tc.optimizer,
            fine_tune_encoders: tc.fine_tune_encoders,
            validation_fraction: 0.2,
        }
    }
}

impl TrainingSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed,
            early_stop_patience: self.early_stop_patience,
            optimizer: self.optimizer,
            fine_tune_encoders: self.fine_tune_encoders,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub averaging: Averaging,
    /// Renders the published-results column without the `--baseline` flag.
    pub baseline: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&raw)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.validate()?;
        cfg.resolve_paths(path.parent().unwrap_or_else(|| Path::new(".")));
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let t = &self.training;
        if t.epochs == 0 {
            bail!("training.epochs must be positive");
        }
        if t.batch_size == 0 {
            bail!("training.batch_size must be positive");
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            bail!(
                "training.learning_rate {} must be a positive finite number",
                t.learning_rate
            );
        }
        if !(t.validation_fraction > 0.0 && t.validation_fraction < 1.0) {
            bail!(
                "training.validation_fraction {} outside (0, 1)",
                t.validation_fraction
            );
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(&mut self.paths.train, base);
        if let Some(test) = &mut self.paths.test {
            resolve(test, base);
        }
        resolve(&mut self.paths.out, base);
        for spec in self.encoders.values_mut() {
            if let EncoderConfig::Precomputed { dir } = spec {
                resolve(dir, base);
            }
        }
    }

    /// Builds the encoder registry: the builtin `hash-test` plus every
    /// `[encoders.NAME]` section. A precomputed store must name itself
    /// after its config key.
    pub fn registry(&self) -> anyhow::Result<EncoderRegistry> {
        let mut registry = EncoderRegistry::with_builtins();
        for (name, spec) in &self.encoders {
            match spec {
                EncoderConfig::Hash { dim, max_tokens } => {
                    registry
                        .register(Arc::new(HashEncoder::new(name.clone(), *dim, *max_tokens)))
                        .with_context(|| format!("cannot register encoder {name:?}"))?;
                }
                EncoderConfig::Precomputed { dir } => {
                    let encoder = PrecomputedEncoder::load(dir)
                        .with_context(|| format!("cannot load encoder {name:?}"))?;
                    if encoder.spec().name != *name {
                        bail!(
                            "precomputed store at {} names itself {:?} but is configured as {:?}",
                            dir.display(),
                            encoder.spec().name,
                            name
                        );
                    }
                    registry
                        .register(Arc::new(encoder))
                        .with_context(|| format!("cannot register encoder {name:?}"))?;
                }
            }
        }
        Ok(registry)
    }

    /// Per-model training seeds, derived from the base seed.
    pub fn model_seeds(&self) -> [u64; 3] {
        [
            self.seed,
            self.seed.wrapping_add(1),
            self.seed.wrapping_add(2),
        ]
    }
}

fn resolve(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}
