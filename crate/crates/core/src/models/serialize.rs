//! On-disk model format.
//!
//! A trained model is a directory holding a human-readable
//! `manifest.json` (architecture, config snapshot, encoder names and
//! versions, seed, history, parameter checksum) and `params.bin`, a flat
//! little-endian f64 stream with a short header. The checksum in the
//! manifest is the SHA-256 of the raw parameter bytes, so two training
//! runs can be compared by manifest alone.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::train::TrainReport;
use super::{Architecture, BiLstmConfig, ConcatPairConfig, ModelError, TrainConfig};

const MAGIC: &[u8; 8] = b"TVPARAMS";

/// One encoder slot of a model: which role it fills ("a"/"b" for the
/// sentence pair, "token" for the recurrent model), and the name and
/// version it had at training time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderRecord {
    pub role: String,
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub format_version: u32,
    pub architecture: Architecture,
    pub concat_config: Option<ConcatPairConfig>,
    pub bilstm_config: Option<BiLstmConfig>,
    pub train_config: TrainConfig,
    pub encoders: Vec<EncoderRecord>,
    pub threshold: f64,
    pub history: TrainReport,
    pub param_count: usize,
    pub params_sha256: String,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        use std::fmt::Write;
        write!(out, "{byte:02x}").expect("write to string");
    }
    out
}

fn params_bytes(params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.len() * 8);
    for v in params {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) fn params_checksum(params: &[f64]) -> String {
    sha256_hex(&params_bytes(params))
}

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io {
        path: path.to_owned(),
        source,
    }
}

pub(crate) fn write_model(dir: &Path, manifest: &Manifest, params: &[f64]) -> Result<(), ModelError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let manifest_path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("serialize manifest");
    text.push('\n');
    fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;

    let body = params_bytes(params);
    let mut blob = Vec::with_capacity(16 + body.len());
    blob.extend_from_slice(MAGIC);
    blob.extend_from_slice(&(params.len() as u64).to_le_bytes());
    blob.extend_from_slice(&body);
    let params_path = dir.join("params.bin");
    fs::write(&params_path, blob).map_err(|e| io_err(&params_path, e))?;
    Ok(())
}

pub(crate) fn read_model(dir: &Path) -> Result<(Manifest, Vec<f64>), ModelError> {
    let manifest_path = dir.join("manifest.json");
    let raw = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&raw).map_err(|e| ModelError::BadManifest {
            path: manifest_path.clone(),
            reason: e.to_string(),
        })?;
    if manifest.format_version != 1 {
        return Err(ModelError::BadManifest {
            path: manifest_path.clone(),
            reason: format!("unsupported format_version {}", manifest.format_version),
        });
    }

    let params_path = dir.join("params.bin");
    let blob = fs::read(&params_path).map_err(|e| io_err(&params_path, e))?;
    let bad = |reason: &str| ModelError::BadManifest {
        path: params_path.clone(),
        reason: reason.to_owned(),
    };
    if blob.len() < 16 || &blob[0..8] != MAGIC {
        return Err(bad("missing parameter header"));
    }
    let count = u64::from_le_bytes(blob[8..16].try_into().expect("8 bytes")) as usize;
    if count != manifest.param_count {
        return Err(bad("parameter count disagrees with manifest"));
    }
    let body = &blob[16..];
    if body.len() != count * 8 {
        return Err(bad("parameter blob length disagrees with header"));
    }
    if sha256_hex(body) != manifest.params_sha256 {
        return Err(bad("parameter checksum disagrees with manifest"));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((manifest, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Optimizer;

    fn toy_manifest(params: &[f64]) -> Manifest {
        Manifest {
            format_version: 1,
            architecture: Architecture::ConcatPair,
            concat_config: Some(ConcatPairConfig {
                encoder_a: "hash-test".into(),
                encoder_b: "hash-test".into(),
                hidden_sizes: vec![4],
                dropout: 0.0,
                threshold: 0.5,
            }),
            bilstm_config: None,
            train_config: TrainConfig {
                epochs: 3,
                batch_size: 2,
                learning_rate: 0.1,
                seed: 7,
                early_stop_patience: 0,
                optimizer: Optimizer::Sgd,
                fine_tune_encoders: false,
            },
            encoders: vec![EncoderRecord {
                role: "a".into(),
                name: "hash-test".into(),
                version: "hash/1 dim=64".into(),
            }],
            threshold: 0.5,
            history: TrainReport {
                initial_loss: 0.69,
                epochs: vec![],
                best_epoch: 1,
                best_val_accuracy: 0.5,
            },
            param_count: params.len(),
            params_sha256: params_checksum(params),
        }
    }

    #[test]
    fn round_trip_preserves_manifest_and_params() {
        let dir = tempfile::tempdir().expect("tempdir");
        let params = vec![0.25, -1.5, 3.0, f64::MIN_POSITIVE];
        let manifest = toy_manifest(&params);
        write_model(dir.path(), &manifest, &params).expect("write");
        let (read, read_params) = read_model(dir.path()).expect("read");
        assert_eq!(read, manifest);
        assert_eq!(read_params, params);
    }

    #[test]
    fn tampered_params_fail_the_checksum() {
        let dir = tempfile::tempdir().expect("tempdir");
        let params = vec![1.0, 2.0];
        write_model(dir.path(), &toy_manifest(&params), &params).expect("write");
        let path = dir.path().join("params.bin");
        let mut blob = fs::read(&path).expect("read blob");
        let last = blob.len() - 1;
        blob[last] ^= 0xff;
        fs::write(&path, blob).expect("rewrite");
        let err = read_model(dir.path()).unwrap_err();
        assert!(
            matches!(err, ModelError::BadManifest { ref reason, .. } if reason.contains("checksum")),
            "{err}"
        );
    }

    #[test]
    fn missing_directory_reports_the_path() {
        let err = read_model(Path::new("/nonexistent/model-dir")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/model-dir"), "{err}");
    }

    #[test]
    fn checksum_is_stable_across_runs() {
        let params = vec![0.1, 0.2, 0.3];
        assert_eq!(params_checksum(&params), params_checksum(&params));
        assert_ne!(params_checksum(&params), params_checksum(&[0.1, 0.2]));
    }
}
