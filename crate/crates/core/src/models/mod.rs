//! The three basic classifiers and their shared training machinery.
//!
//! Two architectures cover all three models: a feed-forward head over the
//! concatenation of two sentence embeddings (Models One and Two, differing
//! only in which encoder pair they read), and a bidirectional LSTM over a
//! token embedding sequence (Model Three). Each trained model emits a
//! probability and a hard 0/1 inference; the voting module combines the
//! three inferences.
//!
//! Encoders are frozen during training: embeddings are computed once up
//! front and the gradient stops at the classifier input. The optional
//! fine-tuning flag is honored only by encoders that support it, which
//! none of the built-in ones do; requesting it on a frozen encoder is a
//! configuration error rather than a silent no-op. Dropout regularizes
//! the hidden activations of the feed-forward head and the pooled state
//! of the recurrent model.

pub mod check;
mod concat;
mod lstm;
mod nn;
mod serialize;
mod train;

pub use serialize::EncoderRecord;
pub use train::{EpochStats, TrainReport};

use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, Dataset};
use crate::encoders::{Encoder, EncoderError, EncoderRegistry};
use concat::ConcatPairNet;
use lstm::BiLstmNet;
use train::{Features, NetKind, OwnedFeature};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error("encoder {encoder:?} does not produce {needed} embeddings")]
    EncoderKind {
        encoder: String,
        needed: &'static str,
    },
    #[error("invalid model configuration: {reason}")]
    BadConfig { reason: String },
    #[error("dataset {dataset:?} is not labeled")]
    NotLabeled { dataset: String },
    #[error("dataset {dataset:?} is empty")]
    EmptyDataset { dataset: String },
    #[error("encoder {encoder:?} is frozen and cannot be fine-tuned")]
    FineTuneUnsupported { encoder: String },
    #[error("training loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("text is empty after normalization")]
    EmptyText,
    #[error("sample {id:?}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<ModelError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    BadManifest { path: PathBuf, reason: String },
    #[error(
        "encoder {encoder:?} changed since training (trained with version {stored:?}, \
         registry now has {current:?}); refusing to predict"
    )]
    VersionDrift {
        encoder: String,
        stored: String,
        current: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "concat_pair")]
    ConcatPair,
    #[serde(rename = "bilstm")]
    BiLstm,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::ConcatPair => "concat_pair",
            Architecture::BiLstm => "bilstm",
        }
    }
}

fn default_hidden_sizes() -> Vec<usize> {
    vec![256]
}

fn default_dropout() -> f64 {
    0.1
}

fn default_threshold() -> f64 {
    0.5
}

/// Configuration of the two-encoder feed-forward classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcatPairConfig {
    pub encoder_a: String,
    pub encoder_b: String,
    #[serde(default = "default_hidden_sizes")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl ConcatPairConfig {
    pub fn new(encoder_a: impl Into<String>, encoder_b: impl Into<String>) -> Self {
        ConcatPairConfig {
            encoder_a: encoder_a.into(),
            encoder_b: encoder_b.into(),
            hidden_sizes: default_hidden_sizes(),
            dropout: default_dropout(),
            threshold: default_threshold(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_sizes.contains(&0) {
            return Err(bad_config("hidden layer sizes must be positive"));
        }
        validate_dropout_threshold(self.dropout, self.threshold)
    }
}

/// Configuration of the bidirectional LSTM classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiLstmConfig {
    pub encoder: String,
    #[serde(default = "BiLstmConfig::default_hidden_size")]
    pub hidden_size: usize,
    #[serde(default = "BiLstmConfig::default_layers")]
    pub layers: usize,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl BiLstmConfig {
    fn default_hidden_size() -> usize {
        64
    }

    fn default_layers() -> usize {
        1
    }

    pub fn new(encoder: impl Into<String>) -> Self {
        BiLstmConfig {
            encoder: encoder.into(),
            hidden_size: Self::default_hidden_size(),
            layers: Self::default_layers(),
            dropout: default_dropout(),
            threshold: default_threshold(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_size == 0 {
            return Err(bad_config("hidden_size must be positive"));
        }
        if self.layers == 0 {
            return Err(bad_config("layers must be positive"));
        }
        validate_dropout_threshold(self.dropout, self.threshold)
    }
}

fn bad_config(reason: impl Into<String>) -> ModelError {
    ModelError::BadConfig {
        reason: reason.into(),
    }
}

fn validate_dropout_threshold(dropout: f64, threshold: f64) -> Result<(), ModelError> {
    if !(0.0..1.0).contains(&dropout) {
        return Err(bad_config(format!("dropout {dropout} outside [0, 1)")));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(bad_config(format!("threshold {threshold} outside (0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

/// Shared training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Consecutive epochs without a validation-accuracy improvement
    /// before training stops; 0 disables early stopping.
    pub early_stop_patience: usize,
    pub optimizer: Optimizer,
    pub fine_tune_encoders: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 42,
            early_stop_patience: 10,
            optimizer: Optimizer::Sgd,
            fine_tune_encoders: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(bad_config("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(bad_config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad_config(format!(
                "learning_rate {} must be a positive finite number",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One model's output for one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub probability: f64,
    pub label: u8,
}

impl InferenceResult {
    /// Applies the decision rule: label 1 exactly when the probability
    /// reaches the threshold, so a tie at the threshold maps to 1.
    pub fn from_probability(probability: f64, threshold: f64) -> Self {
        InferenceResult {
            probability,
            label: u8::from(probability >= threshold),
        }
    }
}

type EncoderSlot = (String, Arc<dyn Encoder>);

/// A validated wiring of encoders to an architecture, ready to train.
pub struct UntrainedModel {
    architecture: Architecture,
    concat_config: Option<ConcatPairConfig>,
    bilstm_config: Option<BiLstmConfig>,
    encoders: Vec<EncoderSlot>,
    input_dim: usize,
    dropout: f64,
    threshold: f64,
}

impl std::fmt::Debug for UntrainedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UntrainedModel")
            .field("architecture", &self.architecture)
            .field("input_dim", &self.input_dim)
            .finish_non_exhaustive()
    }
}

impl UntrainedModel {
    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    /// Width of the classifier input: dim(a)+dim(b) for the sentence
    /// pair, the token dimension for the recurrent model.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
}

/// Wires a feed-forward classifier to two sentence encoders.
pub fn build_concat_pair(
    cfg: &ConcatPairConfig,
    registry: &EncoderRegistry,
) -> Result<UntrainedModel, ModelError> {
    cfg.validate()?;
    let a = registry.get(&cfg.encoder_a)?;
    let b = registry.get(&cfg.encoder_b)?;
    for (name, handle) in [(&cfg.encoder_a, &a), (&cfg.encoder_b, &b)] {
        if !handle.spec().kind.has_sentence() {
            return Err(ModelError::EncoderKind {
                encoder: name.clone(),
                needed: "sentence",
            });
        }
    }
    let input_dim = a.spec().dim + b.spec().dim;
    Ok(UntrainedModel {
        architecture: Architecture::ConcatPair,
        concat_config: Some(cfg.clone()),
        bilstm_config: None,
        encoders: vec![("a".to_owned(), a), ("b".to_owned(), b)],
        input_dim,
        dropout: cfg.dropout,
        threshold: cfg.threshold,
    })
}

/// Wires the recurrent classifier to a token encoder.
pub fn build_bilstm(
    cfg: &BiLstmConfig,
    registry: &EncoderRegistry,
) -> Result<UntrainedModel, ModelError> {
    cfg.validate()?;
    let encoder = registry.get(&cfg.encoder)?;
    if !encoder.spec().kind.has_token() {
        return Err(ModelError::EncoderKind {
            encoder: cfg.encoder.clone(),
            needed: "token",
        });
    }
    let input_dim = encoder.spec().dim;
    Ok(UntrainedModel {
        architecture: Architecture::BiLstm,
        concat_config: None,
        bilstm_config: Some(cfg.clone()),
        encoders: vec![("token".to_owned(), encoder)],
        input_dim,
        dropout: cfg.dropout,
        threshold: cfg.threshold,
    })
}

fn feature_for_text(
    architecture: Architecture,
    encoders: &[EncoderSlot],
    text: &str,
) -> Result<OwnedFeature, ModelError> {
    match architecture {
        Architecture::ConcatPair => {
            let mut values = encoders[0].1.encode_sentence(text)?.values;
            values.extend(encoders[1].1.encode_sentence(text)?.values);
            Ok(OwnedFeature::Sentence(values))
        }
        Architecture::BiLstm => Ok(OwnedFeature::Tokens(
            encoders[0].1.encode_tokens(text)?.vectors,
        )),
    }
}

fn dataset_features(
    architecture: Architecture,
    encoders: &[EncoderSlot],
    ds: &Dataset,
) -> Result<(Features, Vec<f64>), ModelError> {
    if !ds.labeled {
        return Err(ModelError::NotLabeled {
            dataset: ds.name.clone(),
        });
    }
    if ds.is_empty() {
        return Err(ModelError::EmptyDataset {
            dataset: ds.name.clone(),
        });
    }
    let mut sentence = Vec::new();
    let mut tokens = Vec::new();
    let mut labels = Vec::with_capacity(ds.len());
    for sample in ds.samples() {
        let wrap = |e: ModelError| ModelError::Sample {
            id: sample.id.clone(),
            source: Box::new(e),
        };
        let label = sample.label.ok_or_else(|| {
            wrap(ModelError::NotLabeled {
                dataset: ds.name.clone(),
            })
        })?;
        labels.push(label.as_u8() as f64);
        match feature_for_text(architecture, encoders, &sample.text).map_err(wrap)? {
            OwnedFeature::Sentence(v) => sentence.push(v),
            OwnedFeature::Tokens(seq) => tokens.push(seq),
        }
    }
    let features = match architecture {
        Architecture::ConcatPair => Features::Sentence(sentence),
        Architecture::BiLstm => Features::Tokens(tokens),
    };
    Ok((features, labels))
}

/// Trains a model plan. Parameters are initialized from the seed in
/// `tc`, so one plan value can serve several reproducible runs.
pub fn train(
    plan: &UntrainedModel,
    train_ds: &Dataset,
    val_ds: &Dataset,
    tc: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    tc.validate()?;
    if tc.fine_tune_encoders {
        for (_, handle) in &plan.encoders {
            if !handle.supports_fine_tuning() {
                return Err(ModelError::FineTuneUnsupported {
                    encoder: handle.spec().name.clone(),
                });
            }
        }
    }
    let (train_features, train_labels) =
        dataset_features(plan.architecture, &plan.encoders, train_ds)?;
    let (val_features, val_labels) = dataset_features(plan.architecture, &plan.encoders, val_ds)?;

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut net = match plan.architecture {
        Architecture::ConcatPair => {
            let cfg = plan.concat_config.as_ref().expect("concat config");
            NetKind::Concat(ConcatPairNet::new(plan.input_dim, &cfg.hidden_sizes, &mut rng))
        }
        Architecture::BiLstm => {
            let cfg = plan.bilstm_config.as_ref().expect("bilstm config");
            NetKind::BiLstm(BiLstmNet::new(
                plan.input_dim,
                cfg.hidden_size,
                cfg.layers,
                &mut rng,
            ))
        }
    };
    let history = train::run_training(
        &mut net,
        plan.dropout,
        plan.threshold,
        &train_features,
        &train_labels,
        &val_features,
        &val_labels,
        tc,
        &mut rng,
    )?;
    Ok(TrainedModel {
        architecture: plan.architecture,
        concat_config: plan.concat_config.clone(),
        bilstm_config: plan.bilstm_config.clone(),
        train_config: tc.clone(),
        encoders: plan.encoders.clone(),
        threshold: plan.threshold,
        history,
        net,
    })
}

/// A trained classifier: immutable parameters plus the encoder handles
/// needed to embed new text.
pub struct TrainedModel {
    architecture: Architecture,
    concat_config: Option<ConcatPairConfig>,
    bilstm_config: Option<BiLstmConfig>,
    train_config: TrainConfig,
    encoders: Vec<EncoderSlot>,
    threshold: f64,
    history: TrainReport,
    net: NetKind,
}

impl std::fmt::Debug for TrainedModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrainedModel")
            .field("architecture", &self.architecture)
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

impl TrainedModel {
    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn history(&self) -> &TrainReport {
        &self.history
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_config
    }

    pub fn encoder_records(&self) -> Vec<EncoderRecord> {
        self.encoders
            .iter()
            .map(|(role, handle)| EncoderRecord {
                role: role.clone(),
                name: handle.spec().name.clone(),
                version: handle.version().to_owned(),
            })
            .collect()
    }

    /// SHA-256 of the parameter bytes; equal checksums mean equal models.
    pub fn params_sha256(&self) -> String {
        serialize::params_checksum(&self.net.flatten())
    }

    pub fn predict(&self, text: &str) -> Result<InferenceResult, ModelError> {
        let normalized = normalize_text(text);
        if normalized.is_empty() {
            return Err(ModelError::EmptyText);
        }
        let feature = feature_for_text(self.architecture, &self.encoders, &normalized)?;
        let z = self.net.logit(feature.as_ref());
        Ok(InferenceResult::from_probability(nn::sigmoid(z), self.threshold))
    }

    /// Order-preserving batch prediction; errors carry the failing
    /// sample's id.
    pub fn predict_batch(
        &self,
        ds: &Dataset,
    ) -> Result<Vec<(String, InferenceResult)>, ModelError> {
        if ds.is_empty() {
            return Err(ModelError::EmptyDataset {
                dataset: ds.name.clone(),
            });
        }
        ds.samples()
            .iter()
            .map(|sample| {
                self.predict(&sample.text)
                    .map(|r| (sample.id.clone(), r))
                    .map_err(|e| ModelError::Sample {
                        id: sample.id.clone(),
                        source: Box::new(e),
                    })
            })
            .collect()
    }

    pub fn save(&self, dir: impl AsRef<std::path::Path>) -> Result<(), ModelError> {
        let params = self.net.flatten();
        let manifest = serialize::Manifest {
            format_version: 1,
            architecture: self.architecture,
            concat_config: self.concat_config.clone(),
            bilstm_config: self.bilstm_config.clone(),
            train_config: self.train_config.clone(),
            encoders: self.encoder_records(),
            threshold: self.threshold,
            history: self.history.clone(),
            param_count: params.len(),
            params_sha256: serialize::params_checksum(&params),
        };
        serialize::write_model(dir.as_ref(), &manifest, &params)
    }

    /// Loads a model directory, re-resolving its encoders from the
    /// registry. Refuses to load when a registered encoder's version no
    /// longer matches the one recorded at training time.
    pub fn load(
        dir: impl AsRef<std::path::Path>,
        registry: &EncoderRegistry,
    ) -> Result<TrainedModel, ModelError> {
        let dir = dir.as_ref();
        let (manifest, params) = serialize::read_model(dir)?;
        let bad = |reason: &str| ModelError::BadManifest {
            path: dir.join("manifest.json"),
            reason: reason.to_owned(),
        };

        let mut encoders = Vec::with_capacity(manifest.encoders.len());
        for record in &manifest.encoders {
            let handle = registry.get(&record.name)?;
            if handle.version() != record.version {
                return Err(ModelError::VersionDrift {
                    encoder: record.name.clone(),
                    stored: record.version.clone(),
                    current: handle.version().to_owned(),
                });
            }
            encoders.push((record.role.clone(), handle));
        }

        // Rebuild the network shape from the stored config; the init
        // draws are immediately overwritten by the stored parameters.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = match manifest.architecture {
            Architecture::ConcatPair => {
                let cfg = manifest
                    .concat_config
                    .as_ref()
                    .ok_or_else(|| bad("concat_pair model without concat_config"))?;
                cfg.validate()?;
                if manifest.encoders.len() != 2 {
                    return Err(bad("concat_pair model needs exactly two encoders"));
                }
                let dim = encoders[0].1.spec().dim + encoders[1].1.spec().dim;
                NetKind::Concat(ConcatPairNet::new(dim, &cfg.hidden_sizes, &mut rng))
            }
            Architecture::BiLstm => {
                let cfg = manifest
                    .bilstm_config
                    .as_ref()
                    .ok_or_else(|| bad("bilstm model without bilstm_config"))?;
                cfg.validate()?;
                if manifest.encoders.len() != 1 {
                    return Err(bad("bilstm model needs exactly one encoder"));
                }
                NetKind::BiLstm(BiLstmNet::new(
                    encoders[0].1.spec().dim,
                    cfg.hidden_size,
                    cfg.layers,
                    &mut rng,
                ))
            }
        };
        if net.param_count() != params.len() {
            return Err(bad(
                "stored parameter count does not fit the configured architecture",
            ));
        }
        net.assign(&params);
        Ok(TrainedModel {
            architecture: manifest.architecture,
            concat_config: manifest.concat_config,
            bilstm_config: manifest.bilstm_config,
            train_config: manifest.train_config,
            encoders,
            threshold: manifest.threshold,
            history: manifest.history,
            net,
        })
    }
}
