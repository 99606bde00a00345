//! Graph convolution with additive neighbor aggregation and a built-in
//! self loop:
//!
//! ```text
//! out_i = sigmoid((W1 + W2) h_i + W2 * sum_{j in N(i)} h_j)
//! ```
//!
//! `N(i)` lists the nodes whose features flow *into* node i, so a directed
//! edge u -> v puts u in `N(v)`.

use super::ops::{sigmoid, sigmoid_prime_from_output};
use super::tensor::Tensor2;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphConv {
    pub w1: Tensor2,
    pub w2: Tensor2,
}

#[derive(Debug, Clone)]
pub struct GraphConvCache {
    pub input: Tensor2,
    pub neighbor_sums: Tensor2,
    pub output: Tensor2,
    pub activated: bool,
}

impl GraphConv {
    pub fn init<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let bound = super::linear::glorot_bound(in_features, out_features);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
        };
        Self {
            w1: Tensor2::from_vec(out_features, in_features, draw(out_features * in_features)),
            w2: Tensor2::from_vec(out_features, in_features, draw(out_features * in_features)),
        }
    }

    pub fn in_features(&self) -> usize {
        self.w1.cols()
    }

    pub fn out_features(&self) -> usize {
        self.w1.rows()
    }

    fn neighbor_sums(h: &Tensor2, neighbors: &[Vec<usize>]) -> Tensor2 {
        let mut sums = Tensor2::zeros(h.rows(), h.cols());
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                for (acc, v) in sums.row_mut(i).iter_mut().zip(h.row(j)) {
                    *acc += v;
                }
            }
        }
        sums
    }

    /// `neighbors[i]` holds the source nodes feeding node i; it must have
    /// one entry per row of `h`. `activate` controls the trailing sigmoid so
    /// the last layer of a stack can expose raw pre-activations.
    pub fn forward(
        &self,
        h: &Tensor2,
        neighbors: &[Vec<usize>],
        activate: bool,
    ) -> (Tensor2, GraphConvCache) {
        assert_eq!(h.rows(), neighbors.len(), "one neighbor list per node");
        assert_eq!(h.cols(), self.in_features());
        let sums = Self::neighbor_sums(h, neighbors);
        let mut w_self = self.w1.clone();
        w_self.add_assign(&self.w2);
        let mut pre = h.matmul_nt(&w_self);
        let agg = sums.matmul_nt(&self.w2);
        pre.add_assign(&agg);
        let out = if activate { sigmoid(&pre) } else { pre };
        let cache = GraphConvCache {
            input: h.clone(),
            neighbor_sums: sums,
            output: out.clone(),
            activated: activate,
        };
        (out, cache)
    }

    /// Returns (grad_input, grad_w1, grad_w2). `neighbors` must be the same
    /// lists given to `forward`.
    pub fn backward(
        &self,
        grad_out: &Tensor2,
        cache: &GraphConvCache,
        neighbors: &[Vec<usize>],
    ) -> (Tensor2, Tensor2, Tensor2) {
        let grad_pre = if cache.activated {
            let mut g = sigmoid_prime_from_output(&cache.output);
            for (gv, u) in g.as_mut_slice().iter_mut().zip(grad_out.as_slice()) {
                *gv *= u;
            }
            g
        } else {
            grad_out.clone()
        };

        // pre = H (W1+W2)^T + S W2^T with S_i = sum of neighbor rows
        let grad_w1 = grad_pre.matmul_tn(&cache.input);
        let mut h_plus_s = cache.input.clone();
        h_plus_s.add_assign(&cache.neighbor_sums);
        let grad_w2 = grad_pre.matmul_tn(&h_plus_s);

        let mut w_self = self.w1.clone();
        w_self.add_assign(&self.w2);
        let mut grad_h = grad_pre.matmul(&w_self);
        // the S term routes grad_pre_i * W2 back to every j in N(i)
        let via_w2 = grad_pre.matmul(&self.w2);
        for (i, ns) in neighbors.iter().enumerate() {
            for &j in ns {
                for (dst, v) in grad_h.row_mut(j).iter_mut().zip(via_w2.row(i)) {
                    *dst += v;
                }
            }
        }
        (grad_h, grad_w1, grad_w2)
    }
}

/// Textbook form of the same layer on a dense adjacency matrix `a`
/// (a[i][j] = 1 iff j in N(i)): sigmoid(H (W1+W2)^T + (A H) W2^T).
/// Exists as an independent oracle for equivalence tests.
pub fn dense_reference_forward(layer: &GraphConv, h: &Tensor2, a: &Tensor2, activate: bool) -> Tensor2 {
    assert_eq!(a.rows(), h.rows());
    assert_eq!(a.cols(), h.rows());
    let mut w_self = layer.w1.clone();
    w_self.add_assign(&layer.w2);
    let mut pre = h.matmul_nt(&w_self);
    let ah = a.matmul(h);
    pre.add_assign(&ah.matmul_nt(&layer.w2));
    if activate {
        sigmoid(&pre)
    } else {
        pre
    }
}
