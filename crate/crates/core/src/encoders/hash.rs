//! Deterministic hash-based encoder.
//!
//! Needs no model files; embeddings are derived from token bytes alone.
//! The construction below is the complete definition and doubles as the
//! oracle for the encoder's tests.
//!
//! Token vector for token `t` (position-independent):
//!
//! 1. Seed a ChaCha8 stream cipher RNG with `SHA-256(UTF-8 bytes of t)`.
//! 2. Draw uniforms `u = (next_u64 >> 11) / 2^53` in `[0, 1)`; map pairs
//!    `(1 - u_a, u_b)` through Box-Muller to standard normal values until
//!    `dim` values are produced (the second value of the last pair is
//!    dropped when `dim` is odd).
//! 3. Divide by the L2 norm, giving a unit vector.
//!
//! Sentence vector: tokenize, truncate to `max_tokens`, average the token
//! vectors elementwise, divide by the L2 norm (clamped to 1e-12).

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{
    tokenize, Encoder, EncoderError, EncoderKind, EncoderSpec, SentenceEmbedding,
    TokenEmbeddingSequence,
};

pub struct HashEncoder {
    spec: EncoderSpec,
    version: String,
}

impl HashEncoder {
    /// The canonical test instance: name `hash-test`, dim 64, max_tokens 128.
    pub fn hash_test() -> Self {
        Self::new("hash-test", 64, 128)
    }

    pub fn new(name: impl Into<String>, dim: usize, max_tokens: usize) -> Self {
        assert!(dim > 0, "dim must be positive");
        assert!(max_tokens > 0, "max_tokens must be positive");
        let name = name.into();
        let version = format!("hash/1 dim={dim}");
        HashEncoder {
            spec: EncoderSpec {
                name,
                kind: EncoderKind::Both,
                dim,
                max_tokens,
            },
            version,
        }
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        token_unit_vector(token, self.spec.dim)
    }

    fn truncated_tokens(&self, text: &str) -> Result<Vec<String>, EncoderError> {
        let mut tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(EncoderError::EmptyText {
                encoder: self.spec.name.clone(),
            });
        }
        if tokens.len() > self.spec.max_tokens {
            log::debug!(
                "encoder {}: truncating {} tokens to {}",
                self.spec.name,
                tokens.len(),
                self.spec.max_tokens
            );
            tokens.truncate(self.spec.max_tokens);
        }
        Ok(tokens)
    }
}

/// Steps 1-3 of the construction for a single token.
pub fn token_unit_vector(token: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(token.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);

    let mut values = Vec::with_capacity(dim + 1);
    while values.len() < dim {
        let u_a = 1.0 - uniform_53(&mut rng); // in (0, 1]
        let u_b = uniform_53(&mut rng);
        let radius = (-2.0 * u_a.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u_b;
        values.push(radius * angle.cos());
        values.push(radius * angle.sin());
    }
    values.truncate(dim);

    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut values {
        *v /= norm;
    }
    values
}

fn uniform_53(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

impl Encoder for HashEncoder {
    fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn encode_sentence(&self, text: &str) -> Result<SentenceEmbedding, EncoderError> {
        let tokens = self.truncated_tokens(text)?;
        let mut mean = vec![0.0; self.spec.dim];
        for token in &tokens {
            for (m, v) in mean.iter_mut().zip(self.token_vector(token)) {
                *m += v;
            }
        }
        let count = tokens.len() as f64;
        for m in &mut mean {
            *m /= count;
        }
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for m in &mut mean {
            *m /= norm;
        }
        Ok(SentenceEmbedding { values: mean })
    }

    fn encode_tokens(&self, text: &str) -> Result<TokenEmbeddingSequence, EncoderError> {
        let tokens = self.truncated_tokens(text)?;
        let vectors: Vec<Vec<f64>> = tokens.iter().map(|t| self.token_vector(t)).collect();
        let mask = vec![true; vectors.len()];
        Ok(TokenEmbeddingSequence { vectors, mask })
    }
}
