//! Bidirectional LSTM classifier network.
//!
//! The cell packs its four gates into one 4h-wide affine map in the fixed
//! block order [input, forget, candidate, output]. The classifier reads
//! the concatenated final hidden states of the two directions, so its
//! input width is 2×hidden regardless of sequence length. Backpropagation
//! through time is exact, which the finite-difference checks in
//! [`crate::models::check`] verify.

use rand_chacha::ChaCha8Rng;

use super::nn::{sigmoid, Dense, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub hidden: usize,
    pub w: Mat,       // 4h × in
    pub u: Mat,       // 4h × h
    pub b: Vec<f64>,  // 4h
}

/// Everything one timestep's backward pass needs.
#[derive(Debug, Clone)]
pub struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    c: Vec<f64>,
}

impl LstmCell {
    /// Xavier-uniform weights; biases zero except the forget block, which
    /// starts at 1.0 so early training does not erase cell state.
    pub fn xavier(in_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        use rand::Rng;
        let w_limit = (6.0 / (in_dim + hidden) as f64).sqrt();
        let u_limit = (6.0 / (2 * hidden) as f64).sqrt();
        let w = Mat::from_fn(4 * hidden, in_dim, || rng.random_range(-w_limit..w_limit));
        let u = Mat::from_fn(4 * hidden, hidden, || rng.random_range(-u_limit..u_limit));
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        LstmCell { hidden, w, u, b }
    }

    pub fn zeros_like(&self) -> Self {
        LstmCell {
            hidden: self.hidden,
            w: Mat::zeros(self.w.rows, self.w.cols),
            u: Mat::zeros(self.u.rows, self.u.cols),
            b: vec![0.0; self.b.len()],
        }
    }

    #[cfg(test)]
    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let h = self.hidden;
        let mut z = self.w.matvec(x);
        let zu = self.u.matvec(h_prev);
        for (zv, uv) in z.iter_mut().zip(&zu) {
            *zv += uv;
        }
        for (zv, bv) in z.iter_mut().zip(&self.b) {
            *zv += bv;
        }
        let i: Vec<f64> = z[0..h].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<f64> = z[h..2 * h].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<f64> = z[2 * h..3 * h].iter().map(|&v| v.tanh()).collect();
        let o: Vec<f64> = z[3 * h..4 * h].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
        let h_out: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
            h: h_out,
            c,
        }
    }

    /// One BPTT step. `dh` and `dc` are the gradients flowing into this
    /// timestep's outputs; returns (dx, dh_prev, dc_prev).
    pub fn backward_step(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmCell,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.hidden;
        let mut dz = vec![0.0; 4 * h];
        let mut dc_total = vec![0.0; h];
        for k in 0..h {
            let do_k = dh[k] * cache.tanh_c[k];
            dz[3 * h + k] = do_k * cache.o[k] * (1.0 - cache.o[k]);
            dc_total[k] = dc[k] + dh[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
            let di = dc_total[k] * cache.g[k];
            dz[k] = di * cache.i[k] * (1.0 - cache.i[k]);
            let df = dc_total[k] * cache.c_prev[k];
            dz[h + k] = df * cache.f[k] * (1.0 - cache.f[k]);
            let dg = dc_total[k] * cache.i[k];
            dz[2 * h + k] = dg * (1.0 - cache.g[k] * cache.g[k]);
        }
        grad.w.add_outer(&dz, &cache.x);
        grad.u.add_outer(&dz, &cache.h_prev);
        for (gb, d) in grad.b.iter_mut().zip(&dz) {
            *gb += d;
        }
        let dx = self.w.matvec_t(&dz);
        let dh_prev = self.u.matvec_t(&dz);
        let dc_prev: Vec<f64> = (0..h).map(|k| dc_total[k] * cache.f[k]).collect();
        (dx, dh_prev, dc_prev)
    }

    /// Runs the full sequence in `inputs` order, starting from zero state.
    pub fn run(&self, inputs: impl Iterator<Item = Vec<f64>>) -> Vec<StepCache> {
        let h = self.hidden;
        let mut caches = Vec::new();
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        for x in inputs {
            let cache = self.step(&x, &h_prev, &c_prev);
            h_prev = cache.h.clone();
            c_prev = cache.c.clone();
            caches.push(cache);
        }
        caches
    }

    /// BPTT over a full direction run. `dh_out[t]` is the gradient flowing
    /// into the hidden state emitted at processing step t; returns dx per
    /// processing step.
    pub fn run_backward(
        &self,
        caches: &[StepCache],
        dh_out: &[Vec<f64>],
        grad: &mut LstmCell,
    ) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let steps = caches.len();
        let mut dxs = vec![Vec::new(); steps];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let dh_total: Vec<f64> = dh_out[t]
                .iter()
                .zip(&dh_next)
                .map(|(a, b)| a + b)
                .collect();
            let (dx, dh_prev, dc_prev) =
                self.backward_step(&caches[t], &dh_total, &dc_next, grad);
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }

    pub fn param_count(&self) -> usize {
        self.w.rows * self.w.cols + self.u.rows * self.u.cols + self.b.len()
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(self.u.data());
        out.extend_from_slice(&self.b);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for v in self
            .w
            .data_mut()
            .iter_mut()
            .chain(self.u.data_mut())
            .chain(&mut self.b)
        {
            *v = *src.next().expect("parameter stream too short");
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLayer {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
}

/// Stacked bidirectional layers plus a scalar classifier head over the
/// concatenated final states.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmNet {
    pub layers: Vec<BiLayer>,
    pub head: Dense,
}

pub struct BiCache {
    /// Per layer: caches of each direction, in processing order.
    layer_runs: Vec<(Vec<StepCache>, Vec<StepCache>)>,
    /// Head input after the optional dropout mask.
    pooled: Vec<f64>,
}

impl BiLstmNet {
    pub fn new(input_dim: usize, hidden: usize, layers: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(layers >= 1, "at least one recurrent layer");
        let mut built = Vec::with_capacity(layers);
        for layer in 0..layers {
            let in_dim = if layer == 0 { input_dim } else { 2 * hidden };
            built.push(BiLayer {
                fwd: LstmCell::xavier(in_dim, hidden, rng),
                bwd: LstmCell::xavier(in_dim, hidden, rng),
            });
        }
        let head = Dense::xavier(2 * hidden, 1, rng);
        BiLstmNet {
            layers: built,
            head,
        }
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].fwd.hidden
    }

    pub fn head_in_dim(&self) -> usize {
        self.head.in_dim()
    }

    pub fn zeros_like(&self) -> Self {
        BiLstmNet {
            layers: self
                .layers
                .iter()
                .map(|l| BiLayer {
                    fwd: l.fwd.zeros_like(),
                    bwd: l.bwd.zeros_like(),
                })
                .collect(),
            head: self.head.zeros_like(),
        }
    }

    /// Forward pass over a non-empty token vector sequence. `pool_mask`
    /// is the training-time dropout mask for the pooled state.
    pub fn forward(&self, seq: &[Vec<f64>], pool_mask: Option<&[f64]>) -> (f64, BiCache) {
        assert!(!seq.is_empty(), "empty token sequence");
        let mut layer_runs = Vec::with_capacity(self.layers.len());
        let mut current: Vec<Vec<f64>> = seq.to_vec();
        for layer in &self.layers {
            let fwd = layer.fwd.run(current.iter().cloned());
            let bwd = layer.bwd.run(current.iter().rev().cloned());
            let steps = current.len();
            current = (0..steps)
                .map(|t| {
                    let mut v = fwd[t].h.clone();
                    v.extend_from_slice(&bwd[steps - 1 - t].h);
                    v
                })
                .collect();
            layer_runs.push((fwd, bwd));
        }
        let (fwd, bwd) = layer_runs.last().expect("at least one layer");
        let mut pooled = fwd.last().expect("non-empty").h.clone();
        pooled.extend_from_slice(&bwd.last().expect("non-empty").h);
        if let Some(mask) = pool_mask {
            super::nn::apply_mask(&mut pooled, mask);
        }
        let logit = self.head.forward(&pooled)[0];
        (logit, BiCache { layer_runs, pooled })
    }

    pub fn logit(&self, seq: &[Vec<f64>]) -> f64 {
        self.forward(seq, None).0
    }

    pub fn backward(
        &self,
        cache: &BiCache,
        dlogit: f64,
        pool_mask: Option<&[f64]>,
        grad: &mut BiLstmNet,
    ) {
        let h = self.hidden();
        let mut dpool = self.head.backward(&cache.pooled, &[dlogit], &mut grad.head);
        if let Some(mask) = pool_mask {
            super::nn::apply_mask(&mut dpool, mask);
        }

        // Gradient flowing into each direction's outputs (processing
        // order), for the top layer: only the final step's state feeds
        // the head.
        let top = self.layers.len() - 1;
        let steps = cache.layer_runs[top].0.len();
        let zeros = vec![0.0; h];
        let mut dh_fwd: Vec<Vec<f64>> = vec![zeros.clone(); steps];
        let mut dh_bwd: Vec<Vec<f64>> = vec![zeros.clone(); steps];
        dh_fwd[steps - 1] = dpool[0..h].to_vec();
        dh_bwd[steps - 1] = dpool[h..2 * h].to_vec();

        for layer_idx in (0..self.layers.len()).rev() {
            let (fwd_caches, bwd_caches) = &cache.layer_runs[layer_idx];
            let layer = &self.layers[layer_idx];
            let grad_layer = &mut grad.layers[layer_idx];
            let dx_fwd = layer.fwd.run_backward(fwd_caches, &dh_fwd, &mut grad_layer.fwd);
            let dx_bwd = layer.bwd.run_backward(bwd_caches, &dh_bwd, &mut grad_layer.bwd);
            if layer_idx == 0 {
                break;
            }
            // This layer's input at original step t was the concatenation
            // of the lower layer's two direction outputs at t; split the
            // input gradients back onto those outputs.
            let t_last = steps - 1;
            dh_fwd = vec![vec![0.0; h]; steps];
            dh_bwd = vec![vec![0.0; h]; steps];
            for t in 0..steps {
                let mut din = dx_fwd[t].clone();
                for (a, b) in din.iter_mut().zip(&dx_bwd[t_last - t]) {
                    *a += b;
                }
                dh_fwd[t] = din[0..h].to_vec();
                dh_bwd[t_last - t] = din[h..2 * h].to_vec();
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.fwd.param_count() + l.bwd.param_count())
            .sum::<usize>()
            + self.head.param_count()
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        for layer in &self.layers {
            layer.fwd.write_params(out);
            layer.bwd.write_params(out);
        }
        self.head.write_params(out);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for layer in &mut self.layers {
            layer.fwd.read_params(src);
            layer.bwd.read_params(src);
        }
        self.head.read_params(src);
    }
}
