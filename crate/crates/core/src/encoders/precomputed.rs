//! Adapter over embedding dumps produced by real pretrained encoders.
//!
//! Running large pretrained models is out of scope for this crate, so the
//! bridge is file-based: export embeddings offline (one JSON line per text,
//! keyed by the SHA-256 of the exact normalized text) into a store
//! directory, then register the store as an encoder. The store manifest
//! carries the upstream model's name, version, dimension, and token budget;
//! `dim` is read from the manifest at registration time, never hard-coded.
//!
//! Store layout:
//!
//! ```text
//! store/
//!   manifest.json    {"name", "version", "kind", "dim", "max_tokens"}
//!   sentences.jsonl  {"sha256": "<hex>", "values": [f64; dim]} per line
//!   tokens.jsonl     {"sha256": "<hex>", "vectors": [[f64; dim], ...]} per line
//! ```
//!
//! `sentences.jsonl` is required when `kind` includes sentence output,
//! `tokens.jsonl` when it includes token output.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Encoder, EncoderError, EncoderKind, EncoderSpec, SentenceEmbedding, TokenEmbeddingSequence};

#[derive(Debug, Serialize, Deserialize)]
struct StoreManifest {
    name: String,
    version: String,
    kind: EncoderKind,
    dim: usize,
    max_tokens: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SentenceLine {
    sha256: String,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TokenLine {
    sha256: String,
    vectors: Vec<Vec<f64>>,
}

pub struct PrecomputedEncoder {
    spec: EncoderSpec,
    version: String,
    sentences: HashMap<String, Vec<f64>>,
    tokens: HashMap<String, Vec<Vec<f64>>>,
}

impl std::fmt::Debug for PrecomputedEncoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrecomputedEncoder")
            .field("spec", &self.spec)
            .field("sentences", &self.sentences.len())
            .field("tokens", &self.tokens.len())
            .finish()
    }
}

fn text_key(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("write to string");
    }
    out
}

fn bad_store(path: &Path, reason: impl Into<String>) -> EncoderError {
    EncoderError::BadStore {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

impl PrecomputedEncoder {
    /// Loads a store directory, validating every vector against the
    /// manifest's dim and max_tokens.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EncoderError> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let raw = fs::read_to_string(&manifest_path).map_err(|source| EncoderError::Io {
            path: manifest_path.clone(),
            source,
        })?;
        let manifest: StoreManifest =
            serde_json::from_str(&raw).map_err(|e| bad_store(&manifest_path, e.to_string()))?;
        if manifest.dim == 0 || manifest.max_tokens == 0 {
            return Err(bad_store(&manifest_path, "dim and max_tokens must be positive"));
        }

        let mut sentences = HashMap::new();
        if manifest.kind.has_sentence() {
            let path = dir.join("sentences.jsonl");
            let raw = fs::read_to_string(&path).map_err(|source| EncoderError::Io {
                path: path.clone(),
                source,
            })?;
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: SentenceLine = serde_json::from_str(line)
                    .map_err(|e| bad_store(&path, format!("line {}: {e}", i + 1)))?;
                if parsed.values.len() != manifest.dim {
                    return Err(bad_store(
                        &path,
                        format!(
                            "line {}: vector length {} != dim {}",
                            i + 1,
                            parsed.values.len(),
                            manifest.dim
                        ),
                    ));
                }
                sentences.insert(parsed.sha256, parsed.values);
            }
        }

        let mut tokens = HashMap::new();
        if manifest.kind.has_token() {
            let path = dir.join("tokens.jsonl");
            let raw = fs::read_to_string(&path).map_err(|source| EncoderError::Io {
                path: path.clone(),
                source,
            })?;
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: TokenLine = serde_json::from_str(line)
                    .map_err(|e| bad_store(&path, format!("line {}: {e}", i + 1)))?;
                if parsed.vectors.is_empty() || parsed.vectors.len() > manifest.max_tokens {
                    return Err(bad_store(
                        &path,
                        format!(
                            "line {}: {} rows outside 1..={}",
                            i + 1,
                            parsed.vectors.len(),
                            manifest.max_tokens
                        ),
                    ));
                }
                if parsed.vectors.iter().any(|v| v.len() != manifest.dim) {
                    return Err(bad_store(
                        &path,
                        format!("line {}: row width != dim {}", i + 1, manifest.dim),
                    ));
                }
                tokens.insert(parsed.sha256, parsed.vectors);
            }
        }

        Ok(PrecomputedEncoder {
            spec: EncoderSpec {
                name: manifest.name,
                kind: manifest.kind,
                dim: manifest.dim,
                max_tokens: manifest.max_tokens,
            },
            version: manifest.version,
            sentences,
            tokens,
        })
    }

    fn missing(&self, text: &str) -> EncoderError {
        let preview: String = text.chars().take(40).collect();
        EncoderError::MissingText {
            encoder: self.spec.name.clone(),
            preview,
        }
    }
}

impl Encoder for PrecomputedEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn encode_sentence(&self, text: &str) -> Result<SentenceEmbedding, EncoderError> {
        if text.trim().is_empty() {
            return Err(EncoderError::EmptyText {
                encoder: self.spec.name.clone(),
            });
        }
        if !self.spec.kind.has_sentence() {
            return Err(EncoderError::KindMismatch {
                encoder: self.spec.name.clone(),
                needed: "sentence",
            });
        }
        let values = self
            .sentences
            .get(&text_key(text))
            .ok_or_else(|| self.missing(text))?;
        Ok(SentenceEmbedding {
            values: values.clone(),
        })
    }

    fn encode_tokens(&self, text: &str) -> Result<TokenEmbeddingSequence, EncoderError> {
        if text.trim().is_empty() {
            return Err(EncoderError::EmptyText {
                encoder: self.spec.name.clone(),
            });
        }
        if !self.spec.kind.has_token() {
            return Err(EncoderError::KindMismatch {
                encoder: self.spec.name.clone(),
                needed: "token",
            });
        }
        let vectors = self
            .tokens
            .get(&text_key(text))
            .ok_or_else(|| self.missing(text))?;
        Ok(TokenEmbeddingSequence {
            vectors: vectors.clone(),
            mask: vec![true; vectors.len()],
        })
    }
}

/// Writes precomputed stores. Used by the embedding-export workflow and by
/// tests that stand in for real pretrained encoders.
pub struct PrecomputedStoreBuilder {
    manifest: StoreManifest,
    sentences: Vec<SentenceLine>,
    tokens: Vec<TokenLine>,
}

impl PrecomputedStoreBuilder {
    pub fn new(
        name: impl Into<String>,
        version: impl Into<String>,
        kind: EncoderKind,
        dim: usize,
        max_tokens: usize,
    ) -> Self {
        PrecomputedStoreBuilder {
            manifest: StoreManifest {
                name: name.into(),
                version: version.into(),
                kind,
                dim,
                max_tokens,
            },
            sentences: Vec::new(),
            tokens: Vec::new(),
        }
    }

    pub fn add_sentence(&mut self, text: &str, values: Vec<f64>) -> &mut Self {
        self.sentences.push(SentenceLine {
            sha256: text_key(text),
            values,
        });
        self
    }

    pub fn add_tokens(&mut self, text: &str, vectors: Vec<Vec<f64>>) -> &mut Self {
        self.tokens.push(TokenLine {
            sha256: text_key(text),
            vectors,
        });
        self
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), EncoderError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| EncoderError::Io {
            path: dir.to_owned(),
            source,
        })?;
        let io_err = |path: &PathBuf, source| EncoderError::Io {
            path: path.clone(),
            source,
        };

        let manifest_path = dir.join("manifest.json");
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("serialize manifest");
        fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;

        if self.manifest.kind.has_sentence() {
            let path = dir.join("sentences.jsonl");
            let mut out = Vec::new();
            for line in &self.sentences {
                writeln!(out, "{}", serde_json::to_string(line).expect("serialize line"))
                    .expect("write to vec");
            }
            fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        }
        if self.manifest.kind.has_token() {
            let path = dir.join("tokens.jsonl");
            let mut out = Vec::new();
            for line in &self.tokens {
                writeln!(out, "{}", serde_json::to_string(line).expect("serialize line"))
                    .expect("write to vec");
            }
            fs::write(&path, out).map_err(|e| io_err(&path, e))?;
        }
        Ok(())
    }
}
