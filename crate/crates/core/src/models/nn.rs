//! Dense-layer primitives shared by both classifier heads.
//!
//! Everything is f64 and single-threaded; these networks are small enough
//! that clarity and bit-for-bit reproducibility matter more than speed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut() -> f64) -> Self {
        let data = (0..rows * cols).map(|_| f()).collect();
        Mat { rows, cols, data }
    }

    #[cfg(test)]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[cfg(test)]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// y = Mᵀ x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (row, xr) in self.data.chunks_exact(self.cols).zip(x) {
            for (acc, w) in y.iter_mut().zip(row) {
                *acc += w * xr;
            }
        }
        y
    }

    /// M += a ⊗ b (outer product accumulate).
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, bv) in row.iter_mut().zip(b) {
                *w += ar * bv;
            }
        }
    }
}

/// Fully connected layer, z = W x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Mat,
    pub b: Vec<f64>,
}

impl Dense {
    /// Xavier-uniform init: weights in ±sqrt(6/(fan_in+fan_out)), zero bias.
    /// The draw order (W row-major, then nothing for b) is part of the
    /// reproducibility contract.
    pub fn xavier(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        Dense {
            w: Mat::from_fn(out_dim, in_dim, || rng.random_range(-limit..limit)),
            b: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Dense {
            w: Mat::zeros(self.w.rows, self.w.cols),
            b: vec![0.0; self.b.len()],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.w.matvec(x);
        for (zv, bv) in z.iter_mut().zip(&self.b) {
            *zv += bv;
        }
        z
    }

    /// Accumulates dW and db into `grad` and returns dx.
    pub fn backward(&self, x: &[f64], dz: &[f64], grad: &mut Dense) -> Vec<f64> {
        grad.w.add_outer(dz, x);
        for (gb, d) in grad.b.iter_mut().zip(dz) {
            *gb += d;
        }
        self.w.matvec_t(dz)
    }

    pub fn param_count(&self) -> usize {
        self.w.rows * self.w.cols + self.b.len()
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for v in self.w.data_mut() {
            *v = *src.next().expect("parameter stream too short");
        }
        for v in &mut self.b {
            *v = *src.next().expect("parameter stream too short");
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn tanh_vec(z: &mut [f64]) {
    for v in z.iter_mut() {
        *v = v.tanh();
    }
}

/// Numerically stable binary cross-entropy on the logit,
/// max(z,0) − z·y + ln(1+e^−|z|).
#[inline]
pub fn bce_with_logits(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

/// d(bce_with_logits)/dz = σ(z) − y.
#[inline]
pub fn bce_dlogit(z: f64, y: f64) -> f64 {
    sigmoid(z) - y
}

/// Inverted-dropout mask: each entry is 0 with probability p, else
/// 1/(1−p), so eval-time forward passes need no rescaling.
pub fn dropout_mask(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let keep_scale = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < p {
                0.0
            } else {
                keep_scale
            }
        })
        .collect()
}

pub fn apply_mask(x: &mut [f64], mask: &[f64]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}
