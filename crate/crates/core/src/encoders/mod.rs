//! A uniform interface over text encoders.
//!
//! An encoder maps a text to a fixed-width sentence vector, a sequence of
//! per-token vectors, or both. Three encoder roles back the basic models:
//! an English model, a multilingual model, and a Spanish model. At desk
//! scale all three roles can be served by the built-in [`HashEncoder`],
//! which needs no weights and is fully specified here; real pretrained
//! encoders plug in through [`PrecomputedEncoder`], an adapter over
//! embedding dumps exported offline.
//!
//! Every handle is read-only after construction and safe to share across
//! threads. Encoding is deterministic: byte-identical text yields
//! byte-identical embeddings for a fixed encoder version.

mod hash;
mod precomputed;

pub use hash::HashEncoder;
pub use precomputed::{PrecomputedEncoder, PrecomputedStoreBuilder};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which representations an encoder can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Sentence,
    Token,
    Both,
}

impl EncoderKind {
    pub fn has_sentence(self) -> bool {
        matches!(self, EncoderKind::Sentence | EncoderKind::Both)
    }

    pub fn has_token(self) -> bool {
        matches!(self, EncoderKind::Token | EncoderKind::Both)
    }
}

/// Static description of an encoder: registry name, capabilities, output
/// width, and the token budget per text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub name: String,
    pub kind: EncoderKind,
    pub dim: usize,
    pub max_tokens: usize,
}

/// A fixed-width sentence vector. Length equals the producing encoder's dim.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbedding {
    pub values: Vec<f64>,
}

impl SentenceEmbedding {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-token vectors for one text, truncated to the encoder's `max_tokens`.
/// `mask[i]` marks row `i` as a real (non-padding) token; single-text
/// encoding never pads, so the mask is all-true.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    pub vectors: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
}

impl TokenEmbeddingSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map(Vec::len).unwrap_or(0)
    }
}

/// A text encoder handle. Implementations must be deterministic and safe
/// for concurrent `encode_*` calls.
pub trait Encoder: Send + Sync {
    fn spec(&self) -> &EncoderSpec;

    /// Version string recorded into trained models for provenance.
    fn version(&self) -> &str;

    fn encode_sentence(&self, text: &str) -> Result<SentenceEmbedding, EncoderError>;

    fn encode_tokens(&self, text: &str) -> Result<TokenEmbeddingSequence, EncoderError>;

    /// Whether the encoder's own parameters can be updated during head
    /// training. The built-in encoders are frozen.
    fn supports_fine_tuning(&self) -> bool {
        false
    }
}

impl std::fmt::Debug for dyn Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Encoder")
            .field("spec", self.spec())
            .field("version", &self.version())
            .finish()
    }
}

/// Name-keyed collection of encoder handles.
///
/// Registration happens during setup, before any lookups; lookups hand out
/// shared handles.
#[derive(Default)]
pub struct EncoderRegistry {
    encoders: BTreeMap<String, Arc<dyn Encoder>>,
}

impl EncoderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry preloaded with the built-in `hash-test` encoder
    /// (kind both, dim 64, max_tokens 128).
    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry
            .register(Arc::new(HashEncoder::hash_test()))
            .expect("empty registry accepts the builtin");
        registry
    }

    pub fn register(&mut self, encoder: Arc<dyn Encoder>) -> Result<(), EncoderError> {
        let name = encoder.spec().name.clone();
        if self.encoders.contains_key(&name) {
            return Err(EncoderError::DuplicateName { name });
        }
        self.encoders.insert(name, encoder);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Encoder>, EncoderError> {
        self.encoders
            .get(name)
            .cloned()
            .ok_or_else(|| EncoderError::Unknown {
                name: name.to_owned(),
                registered: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<String> {
        self.encoders.keys().cloned().collect()
    }
}

/// Splits text into tokens on whitespace and punctuation: a token is either
/// a maximal run of alphanumeric-or-underscore characters or a single other
/// non-whitespace character.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("unknown encoder {name:?}; registered: [{registered}]")]
    Unknown { name: String, registered: String },
    #[error("encoder {name:?} is already registered")]
    DuplicateName { name: String },
    #[error("encoder {encoder:?}: cannot encode empty text")]
    EmptyText { encoder: String },
    #[error("encoder {encoder:?} does not produce {needed} embeddings")]
    KindMismatch {
        encoder: String,
        needed: &'static str,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad precomputed store at {path}: {reason}")]
    BadStore { path: PathBuf, reason: String },
    #[error("encoder {encoder:?} has no precomputed embedding for text starting {preview:?}")]
    MissingText { encoder: String, preview: String },
}
