//! Network building blocks with explicit forward caches and hand-written
//! backward passes: linear layers, LSTM cells, and inverted-dropout masks.
//!
//! Backward functions accumulate parameter gradients into mirror structs and
//! return the gradient with respect to the layer input. LSTM backward
//! deliberately does not produce gradients for the previous hidden/cell
//! state: updates replay single steps from stored (detached) states, so
//! backpropagation truncates at the step boundary.

use super::linalg::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn orthogonal(out_dim: usize, in_dim: usize, gain: f64, rng: &mut impl Rng) -> Self {
        Linear {
            w: Matrix::orthogonal(out_dim, in_dim, gain, rng),
            b: vec![0.0; out_dim],
        }
    }

    pub fn zeros_like(&self) -> Linear {
        Linear {
            w: Matrix::zeros(self.w.rows, self.w.cols),
            b: vec![0.0; self.b.len()],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.w.matvec(x);
        for (yi, bi) in y.iter_mut().zip(&self.b) {
            *yi += bi;
        }
        y
    }

    /// Accumulate gradients for `dy` at input `x`; returns `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut Linear) -> Vec<f64> {
        grads.w.add_outer(dy, x);
        super::linalg::add_assign(&mut grads.b, dy);
        self.w.matvec_transpose(dy)
    }
}

/// Single LSTM cell (combined bias). Gate order in the stacked dimension is
/// `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub w_ih: Matrix,
    pub w_hh: Matrix,
    pub b: Vec<f64>,
}

/// Everything the backward pass needs about one LSTM forward step.
#[derive(Debug, Clone)]
pub struct LstmCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmCell {
    /// Torch-style uniform initialization: all weights and biases from
    /// `U(-1/sqrt(hidden), 1/sqrt(hidden))`.
    pub fn uniform(hidden: usize, input: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmCell {
            w_ih: Matrix::uniform(4 * hidden, input, bound, rng),
            w_hh: Matrix::uniform(4 * hidden, hidden, bound, rng),
            b: (0..4 * hidden).map(|_| rng.gen_range(-bound..=bound)).collect(),
        }
    }

    pub fn zeros_like(&self) -> LstmCell {
        LstmCell {
            w_ih: Matrix::zeros(self.w_ih.rows, self.w_ih.cols),
            w_hh: Matrix::zeros(self.w_hh.rows, self.w_hh.cols),
            b: vec![0.0; self.b.len()],
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b.len() / 4
    }

    /// One step; returns `(h, c, cache)`.
    pub fn forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmCache) {
        let hidden = self.hidden_dim();
        let mut z = self.w_ih.matvec(x);
        let zh = self.w_hh.matvec(h_prev);
        for ((zi, zhi), bi) in z.iter_mut().zip(&zh).zip(&self.b) {
            *zi += zhi + bi;
        }

        let mut i = vec![0.0; hidden];
        let mut f = vec![0.0; hidden];
        let mut g = vec![0.0; hidden];
        let mut o = vec![0.0; hidden];
        for d in 0..hidden {
            i[d] = sigmoid(z[d]);
            f[d] = sigmoid(z[hidden + d]);
            g[d] = z[2 * hidden + d].tanh();
            o[d] = sigmoid(z[3 * hidden + d]);
        }

        let mut c = vec![0.0; hidden];
        let mut tanh_c = vec![0.0; hidden];
        let mut h = vec![0.0; hidden];
        for d in 0..hidden {
            c[d] = f[d] * c_prev[d] + i[d] * g[d];
            tanh_c[d] = c[d].tanh();
            h[d] = o[d] * tanh_c[d];
        }

        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        (h, c, cache)
    }

    /// Backward for one step given `dh` (gradient w.r.t. the new hidden
    /// state). Accumulates parameter gradients, returns `dx`. Gradients into
    /// `h_prev`/`c_prev` are dropped (truncated backpropagation).
    pub fn backward(&self, cache: &LstmCache, dh: &[f64], grads: &mut LstmCell) -> Vec<f64> {
        let hidden = self.hidden_dim();
        let mut dz = vec![0.0; 4 * hidden];
        for d in 0..hidden {
            let dc = dh[d] * cache.o[d] * (1.0 - cache.tanh_c[d] * cache.tanh_c[d]);
            let d_o = dh[d] * cache.tanh_c[d];
            let d_i = dc * cache.g[d];
            let d_f = dc * cache.c_prev[d];
            let d_g = dc * cache.i[d];
            dz[d] = d_i * cache.i[d] * (1.0 - cache.i[d]);
            dz[hidden + d] = d_f * cache.f[d] * (1.0 - cache.f[d]);
            dz[2 * hidden + d] = d_g * (1.0 - cache.g[d] * cache.g[d]);
            dz[3 * hidden + d] = d_o * cache.o[d] * (1.0 - cache.o[d]);
        }
        grads.w_ih.add_outer(&dz, &cache.x);
        grads.w_hh.add_outer(&dz, &cache.h_prev);
        super::linalg::add_assign(&mut grads.b, &dz);
        self.w_ih.matvec_transpose(&dz)
    }
}

/// Inverted-dropout mask: entries are `0` (dropped) or `1/(1-p)` (kept and
/// rescaled), so the expected value of the masked signal is unchanged and
/// inference needs no rescaling.
pub fn sample_dropout_mask(dim: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&p));
    if p == 0.0 {
        return vec![1.0; dim];
    }
    let keep_scale = 1.0 / (1.0 - p);
    (0..dim)
        .map(|_| {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                keep_scale
            }
        })
        .collect()
}
