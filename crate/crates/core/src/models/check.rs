//! Finite-difference verification of the analytic gradients.
//!
//! Central differences on the mean binary cross-entropy over a small
//! random sample set, compared parameter by parameter against one
//! backward pass. Relative error uses |numeric| + |analytic| in the
//! denominator so agreement between two tiny values still counts.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::concat::ConcatPairNet;
use super::lstm::BiLstmNet;
use super::train::{mean_loss, Features, NetKind};

const EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub params_checked: usize,
}

fn random_labels(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i % 2) as f64).collect()
}

fn check(net: NetKind, features: Features, labels: Vec<f64>) -> GradCheckReport {
    let n = features.len();
    let mut grad = net.zeros_like();
    // Dropout is off, so the RNG is never drawn from; any seed works.
    let mut unused_rng = ChaCha8Rng::seed_from_u64(0);
    for (i, label) in labels.iter().enumerate() {
        net.step_sample(features.get(i), *label, 0.0, &mut unused_rng, &mut grad);
    }
    let mut analytic = grad.flatten();
    for g in &mut analytic {
        *g /= n as f64;
    }

    let params = net.flatten();
    let mut probe = net.clone();
    let mut max_rel_error: f64 = 0.0;
    for i in 0..params.len() {
        let mut shifted = params.clone();
        shifted[i] = params[i] + EPS;
        probe.assign(&shifted);
        let hi = mean_loss(&probe, &features, &labels);
        shifted[i] = params[i] - EPS;
        probe.assign(&shifted);
        let lo = mean_loss(&probe, &features, &labels);
        let numeric = (hi - lo) / (2.0 * EPS);
        let rel = (numeric - analytic[i]).abs() / f64::max(1e-8, numeric.abs() + analytic[i].abs());
        max_rel_error = max_rel_error.max(rel);
    }
    GradCheckReport {
        max_rel_error,
        params_checked: params.len(),
    }
}

/// Gradient check for the feed-forward head on random sentence features.
pub fn concat_head(
    input_dim: usize,
    hidden_sizes: &[usize],
    samples: usize,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = NetKind::Concat(ConcatPairNet::new(input_dim, hidden_sizes, &mut rng));
    let features = Features::Sentence(
        (0..samples)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    check(net, features, random_labels(samples))
}

/// Gradient check for the recurrent model, covering the cell equations,
/// backpropagation through time, and the stacked-layer wiring.
pub fn bilstm_cell(
    input_dim: usize,
    hidden: usize,
    layers: usize,
    max_steps: usize,
    samples: usize,
    seed: u64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = NetKind::BiLstm(BiLstmNet::new(input_dim, hidden, layers, &mut rng));
    let features = Features::Tokens(
        (0..samples)
            .map(|i| {
                let steps = 1 + (i % max_steps.max(1));
                (0..steps)
                    .map(|_| (0..input_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect(),
    );
    check(net, features, random_labels(samples))
}
