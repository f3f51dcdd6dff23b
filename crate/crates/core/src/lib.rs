//! Sexism identification for English/Spanish social-media text.
//!
//! The system combines three independent binary classifiers with a majority
//! vote:
//!
//! 1. two sentence-embedding concatenation models, each feeding a pair of
//!    encoder outputs through a feed-forward head, and
//! 2. one token-sequence model that runs per-token embeddings through a
//!    bidirectional LSTM.
//!
//! Each basic model emits a hard label in `{0, 1}` (1 = sexist); the final
//! label is the label that at least two of the three models agree on.
//!
//! The crate is organized along the pipeline:
//!
//! - [`corpus`] — TSV ingestion, text normalization, statistics, and
//!   deterministic stratified train/validation splits.
//! - [`encoders`] — a uniform interface over text encoders producing either
//!   one sentence vector or a per-token vector sequence, with a registry,
//!   a fully specified hash-based test encoder, and an adapter for
//!   precomputed embedding dumps.
//! - [`models`] — the three classifier architectures, seeded training with
//!   early stopping, and model (de)serialization.
//! - [`voting`] — the three-way majority vote and ensemble prediction.
//! - [`evaluation`] — accuracy/F-measure with per-source and per-language
//!   breakdowns, plus text and JSON report rendering.
//! - [`synth`] — deterministic synthetic corpora for desk-scale runs that
//!   need no pretrained weights.

pub mod corpus;
pub mod encoders;
pub mod evaluation;
pub mod models;
pub mod synth;
pub mod voting;
