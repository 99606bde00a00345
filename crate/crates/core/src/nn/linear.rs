//! Fully connected layer `y = x W^T + b`.

use super::tensor::Tensor2;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

/// Weight is stored (out_features x in_features); bias is a 1 x out row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor2,
    pub bias: Tensor2,
}

/// Forward-pass residue needed by backward: the layer input.
#[derive(Debug, Clone)]
pub struct LinearCache {
    pub input: Tensor2,
}

/// Glorot-uniform bound for a weight with the given fan-in and fan-out.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl Linear {
    /// Weights drawn uniformly from +-sqrt(6 / (fan_in + fan_out)), bias zero.
    pub fn init<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(in_features, out_features);
        let data = (0..out_features * in_features)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weight: Tensor2::from_vec(out_features, in_features, data),
            bias: Tensor2::zeros(1, out_features),
        }
    }

    pub fn zeros(in_features: usize, out_features: usize) -> Self {
        Self {
            weight: Tensor2::zeros(out_features, in_features),
            bias: Tensor2::zeros(1, out_features),
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_features(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor2) -> (Tensor2, LinearCache) {
        let mut out = x.matmul_nt(&self.weight);
        for i in 0..out.rows() {
            for (v, b) in out.row_mut(i).iter_mut().zip(self.bias.as_slice()) {
                *v += b;
            }
        }
        (out, LinearCache { input: x.clone() })
    }

    /// Returns (grad_input, grad_weight, grad_bias).
    pub fn backward(&self, grad_out: &Tensor2, cache: &LinearCache) -> (Tensor2, Tensor2, Tensor2) {
        let grad_weight = grad_out.matmul_tn(&cache.input);
        let mut grad_bias = Tensor2::zeros(1, self.out_features());
        for i in 0..grad_out.rows() {
            for (b, g) in grad_bias.as_mut_slice().iter_mut().zip(grad_out.row(i)) {
                *b += g;
            }
        }
        let grad_input = grad_out.matmul(&self.weight);
        (grad_input, grad_weight, grad_bias)
    }
}
