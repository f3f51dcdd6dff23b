//! Feed-forward classifier over the concatenation of two sentence
//! embeddings.
//!
//! Layer shape: input (dim_a + dim_b) → hidden sizes from config, each
//! followed by tanh and, at train time, inverted dropout → scalar logit.

use rand_chacha::ChaCha8Rng;

use super::nn::{apply_mask, Dense};

#[derive(Debug, Clone, PartialEq)]
pub struct ConcatPairNet {
    pub hidden: Vec<Dense>,
    pub output: Dense,
}

pub struct ConcatCache {
    /// Post-activation, post-mask output of each hidden layer.
    activations: Vec<Vec<f64>>,
}

impl ConcatPairNet {
    pub fn new(input_dim: usize, hidden_sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut hidden = Vec::with_capacity(hidden_sizes.len());
        let mut in_dim = input_dim;
        for &size in hidden_sizes {
            hidden.push(Dense::xavier(in_dim, size, rng));
            in_dim = size;
        }
        let output = Dense::xavier(in_dim, 1, rng);
        ConcatPairNet { hidden, output }
    }

    #[cfg(test)]
    pub fn input_dim(&self) -> usize {
        self.hidden
            .first()
            .unwrap_or(&self.output)
            .in_dim()
    }

    pub fn zeros_like(&self) -> Self {
        ConcatPairNet {
            hidden: self.hidden.iter().map(Dense::zeros_like).collect(),
            output: self.output.zeros_like(),
        }
    }

    /// Forward pass. `masks`, when present, holds one dropout mask per
    /// hidden layer.
    pub fn forward(&self, x: &[f64], masks: Option<&[Vec<f64>]>) -> (f64, ConcatCache) {
        let mut activations = Vec::with_capacity(self.hidden.len());
        let mut current = x.to_vec();
        for (idx, layer) in self.hidden.iter().enumerate() {
            let mut a = layer.forward(&current);
            super::nn::tanh_vec(&mut a);
            if let Some(masks) = masks {
                apply_mask(&mut a, &masks[idx]);
            }
            activations.push(a.clone());
            current = a;
        }
        let logit = self.output.forward(&current)[0];
        (logit, ConcatCache { activations })
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.forward(x, None).0
    }

    pub fn backward(
        &self,
        x: &[f64],
        cache: &ConcatCache,
        dlogit: f64,
        masks: Option<&[Vec<f64>]>,
        grad: &mut ConcatPairNet,
    ) {
        let last_input: &[f64] = cache.activations.last().map(Vec::as_slice).unwrap_or(x);
        let mut da = self
            .output
            .backward(last_input, &[dlogit], &mut grad.output);
        for idx in (0..self.hidden.len()).rev() {
            if let Some(masks) = masks {
                apply_mask(&mut da, &masks[idx]);
            }
            // Tanh derivative through the stored activation. With a mask
            // active the stored value is scaled, so recover the raw tanh
            // output first; mask entries are 0 or 1/(1−p).
            let raw: Vec<f64> = match masks {
                Some(masks) => cache.activations[idx]
                    .iter()
                    .zip(&masks[idx])
                    .map(|(a, m)| if *m == 0.0 { 0.0 } else { a / m })
                    .collect(),
                None => cache.activations[idx].clone(),
            };
            let dz: Vec<f64> = da
                .iter()
                .zip(&raw)
                .map(|(d, a)| d * (1.0 - a * a))
                .collect();
            let input: &[f64] = if idx == 0 {
                x
            } else {
                &cache.activations[idx - 1]
            };
            da = self.hidden[idx].backward(input, &dz, &mut grad.hidden[idx]);
        }
    }

    pub fn param_count(&self) -> usize {
        self.hidden.iter().map(Dense::param_count).sum::<usize>() + self.output.param_count()
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.hidden {
            layer.write_params(out);
        }
        self.output.write_params(out);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for layer in &mut self.hidden {
            layer.read_params(src);
        }
        self.output.read_params(src);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn first_layer_width_is_the_concatenated_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = ConcatPairNet::new(128, &[256], &mut rng);
        assert_eq!(net.input_dim(), 128);
        assert_eq!(net.hidden[0].in_dim(), 128);
        assert_eq!(net.hidden[0].out_dim(), 256);
        assert_eq!(net.output.in_dim(), 256);
        assert_eq!(net.output.out_dim(), 1);
    }

    #[test]
    fn zero_hidden_layers_degenerate_to_logistic_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = ConcatPairNet::new(6, &[], &mut rng);
        assert_eq!(net.input_dim(), 6);
        let z = net.logit(&[0.1, -0.2, 0.3, 0.0, 0.5, -0.5]);
        assert!(z.is_finite());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = ConcatPairNet::new(10, &[7, 4], &mut rng);
        let mut flat = Vec::new();
        net.write_params(&mut flat);
        assert_eq!(flat.len(), net.param_count());
        assert_eq!(flat.len(), 10 * 7 + 7 + 7 * 4 + 4 + 4 + 1);
        let mut copy = net.zeros_like();
        copy.read_params(&mut flat.iter());
        assert_eq!(copy, net);
    }

    #[test]
    fn dropout_masked_units_get_no_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = ConcatPairNet::new(4, &[3], &mut rng);
        let x = [0.5, -0.5, 0.25, 1.0];
        let masks = vec![vec![0.0, 2.0, 2.0]];
        let (z, cache) = net.forward(&x, Some(&masks));
        let mut grad = net.zeros_like();
        net.backward(&x, &cache, super::super::nn::bce_dlogit(z, 1.0), Some(&masks), &mut grad);
        // Row 0 of the hidden layer fed a dropped unit: no gradient.
        for c in 0..4 {
            assert_eq!(grad.hidden[0].w.at(0, c), 0.0);
        }
        assert_eq!(grad.hidden[0].b[0], 0.0);
        assert!(grad.hidden[0].w.at(1, 0) != 0.0 || grad.hidden[0].w.at(2, 0) != 0.0);
    }
}
