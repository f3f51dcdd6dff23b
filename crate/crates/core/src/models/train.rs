//! The shared training loop.
//!
//! Both architectures train the same way: precomputed input features,
//! mini-batch gradient descent on binary cross-entropy, per-epoch
//! validation accuracy, and restoration of the best epoch's parameters.
//! Every random draw (init, shuffling, dropout) comes from one seeded
//! generator, so a (config, data, seed) triple fixes the result bit for
//! bit.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::concat::ConcatPairNet;
use super::lstm::BiLstmNet;
use super::nn::{bce_dlogit, bce_with_logits, dropout_mask, sigmoid};
use super::{ModelError, Optimizer, TrainConfig};

/// Precomputed encoder outputs for one dataset, aligned with its samples.
pub(crate) enum Features {
    Sentence(Vec<Vec<f64>>),
    Tokens(Vec<Vec<Vec<f64>>>),
}

impl Features {
    pub(crate) fn len(&self) -> usize {
        match self {
            Features::Sentence(v) => v.len(),
            Features::Tokens(v) => v.len(),
        }
    }

    pub(crate) fn get(&self, idx: usize) -> FeatureRef<'_> {
        match self {
            Features::Sentence(v) => FeatureRef::Sentence(&v[idx]),
            Features::Tokens(v) => FeatureRef::Tokens(&v[idx]),
        }
    }
}

#[derive(Clone, Copy)]
pub(crate) enum FeatureRef<'a> {
    Sentence(&'a [f64]),
    Tokens(&'a [Vec<f64>]),
}

/// One sample's encoder output, owned.
pub(crate) enum OwnedFeature {
    Sentence(Vec<f64>),
    Tokens(Vec<Vec<f64>>),
}

impl OwnedFeature {
    pub(crate) fn as_ref(&self) -> FeatureRef<'_> {
        match self {
            OwnedFeature::Sentence(v) => FeatureRef::Sentence(v),
            OwnedFeature::Tokens(seq) => FeatureRef::Tokens(seq),
        }
    }
}

/// The two classifier architectures behind one training interface.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NetKind {
    Concat(ConcatPairNet),
    BiLstm(BiLstmNet),
}

impl NetKind {
    pub(crate) fn param_count(&self) -> usize {
        match self {
            NetKind::Concat(n) => n.param_count(),
            NetKind::BiLstm(n) => n.param_count(),
        }
    }

    pub(crate) fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        match self {
            NetKind::Concat(n) => n.write_params(&mut out),
            NetKind::BiLstm(n) => n.write_params(&mut out),
        }
        out
    }

    pub(crate) fn assign(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.param_count());
        let mut it = flat.iter();
        match self {
            NetKind::Concat(n) => n.read_params(&mut it),
            NetKind::BiLstm(n) => n.read_params(&mut it),
        }
        debug_assert!(it.next().is_none(), "parameter stream too long");
    }

    pub(crate) fn zeros_like(&self) -> Self {
        match self {
            NetKind::Concat(n) => NetKind::Concat(n.zeros_like()),
            NetKind::BiLstm(n) => NetKind::BiLstm(n.zeros_like()),
        }
    }

    pub(crate) fn logit(&self, feature: FeatureRef<'_>) -> f64 {
        match (self, feature) {
            (NetKind::Concat(n), FeatureRef::Sentence(x)) => n.logit(x),
            (NetKind::BiLstm(n), FeatureRef::Tokens(seq)) => n.logit(seq),
            _ => unreachable!("feature kind does not match architecture"),
        }
    }

    /// Forward + backward for one sample; accumulates into `grad` and
    /// returns the sample loss. Dropout masks are drawn from `rng` only
    /// when `dropout > 0`, keeping the random stream identical between a
    /// zero-dropout config and one with the field omitted.
    pub(crate) fn step_sample(
        &self,
        feature: FeatureRef<'_>,
        y: f64,
        dropout: f64,
        rng: &mut ChaCha8Rng,
        grad: &mut NetKind,
    ) -> f64 {
        match (self, feature, grad) {
            (NetKind::Concat(n), FeatureRef::Sentence(x), NetKind::Concat(g)) => {
                let masks = (dropout > 0.0).then(|| {
                    n.hidden
                        .iter()
                        .map(|l| dropout_mask(l.out_dim(), dropout, rng))
                        .collect::<Vec<_>>()
                });
                let (z, cache) = n.forward(x, masks.as_deref());
                n.backward(x, &cache, bce_dlogit(z, y), masks.as_deref(), g);
                bce_with_logits(z, y)
            }
            (NetKind::BiLstm(n), FeatureRef::Tokens(seq), NetKind::BiLstm(g)) => {
                let mask =
                    (dropout > 0.0).then(|| dropout_mask(n.head_in_dim(), dropout, rng));
                let (z, cache) = n.forward(seq, mask.as_deref());
                n.backward(&cache, bce_dlogit(z, y), mask.as_deref(), g);
                bce_with_logits(z, y)
            }
            _ => unreachable!("feature kind does not match architecture"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Full training history of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss before the first update; near ln 2 for a fresh
    /// init on balanced labels.
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose parameters the trained model keeps (first
    /// epoch reaching the best validation accuracy).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

enum OptState {
    Sgd,
    Adam {
        m: Vec<f64>,
        v: Vec<f64>,
        t: u64,
    },
}

impl OptState {
    fn new(optimizer: Optimizer, n: usize) -> Self {
        match optimizer {
            Optimizer::Sgd => OptState::Sgd,
            Optimizer::Adam => OptState::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            },
        }
    }

    fn apply(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        match self {
            OptState::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * g;
                }
            }
            OptState::Adam { m, v, t } => {
                const BETA1: f64 = 0.9;
                const BETA2: f64 = 0.999;
                const EPS: f64 = 1e-8;
                *t += 1;
                let bc1 = 1.0 - BETA1.powi(*t as i32);
                let bc2 = 1.0 - BETA2.powi(*t as i32);
                for i in 0..params.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * grads[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * grads[i] * grads[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
                }
            }
        }
    }
}

pub(crate) fn mean_loss(net: &NetKind, features: &Features, labels: &[f64]) -> f64 {
    let total: f64 = (0..features.len())
        .map(|i| bce_with_logits(net.logit(features.get(i)), labels[i]))
        .sum();
    total / features.len() as f64
}

pub(crate) fn accuracy_at(
    net: &NetKind,
    features: &Features,
    labels: &[f64],
    threshold: f64,
) -> f64 {
    let correct = (0..features.len())
        .filter(|&i| {
            let p = sigmoid(net.logit(features.get(i)));
            let label = if p >= threshold { 1.0 } else { 0.0 };
            label == labels[i]
        })
        .count();
    correct as f64 / features.len() as f64
}

/// Trains `net` in place and returns the history. On return the net holds
/// the parameters of the best validation epoch.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_training(
    net: &mut NetKind,
    dropout: f64,
    threshold: f64,
    train: &Features,
    train_labels: &[f64],
    val: &Features,
    val_labels: &[f64],
    tc: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainReport, ModelError> {
    let n = train.len();
    let initial_loss = mean_loss(net, train, train_labels);
    let mut params = net.flatten();
    let mut opt = OptState::new(tc.optimizer, params.len());
    let mut indices: Vec<usize> = (0..n).collect();

    let mut epochs = Vec::new();
    let mut best_params = params.clone();
    let mut best_epoch = 0usize;
    let mut best_val_accuracy = f64::NEG_INFINITY;
    let mut stale = 0usize;

    for epoch in 1..=tc.epochs {
        indices.shuffle(rng);
        let mut loss_sum = 0.0;
        for batch in indices.chunks(tc.batch_size) {
            let mut grad = net.zeros_like();
            for &i in batch {
                let loss = net.step_sample(train.get(i), train_labels[i], dropout, rng, &mut grad);
                if !loss.is_finite() {
                    return Err(ModelError::NonFiniteLoss { epoch });
                }
                loss_sum += loss;
            }
            let scale = 1.0 / batch.len() as f64;
            let mut gflat = grad.flatten();
            for g in &mut gflat {
                *g *= scale;
            }
            opt.apply(&mut params, &gflat, tc.learning_rate);
            net.assign(&params);
        }
        let val_accuracy = accuracy_at(net, val, val_labels, threshold);
        epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / n as f64,
            val_accuracy,
        });
        if val_accuracy > best_val_accuracy {
            best_val_accuracy = val_accuracy;
            best_epoch = epoch;
            best_params = params.clone();
            stale = 0;
        } else {
            stale += 1;
            if tc.early_stop_patience > 0 && stale >= tc.early_stop_patience {
                log::debug!("early stop after epoch {epoch} ({stale} stale epochs)");
                break;
            }
        }
    }

    net.assign(&best_params);
    Ok(TrainReport {
        initial_loss,
        epochs,
        best_epoch,
        best_val_accuracy,
    })
}
