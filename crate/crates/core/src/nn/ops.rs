//! Stateless activations, dropout, pooling, and the classification head.

use super::tensor::Tensor2;
use rand::{Rng, RngExt};

pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Element-wise logistic sigmoid.
pub fn sigmoid(x: &Tensor2) -> Tensor2 {
    x.map(sigmoid_scalar)
}

/// Derivative of sigmoid expressed through its output: s'(x) = y (1 - y).
pub fn sigmoid_prime_from_output(y: &Tensor2) -> Tensor2 {
    y.map(|v| v * (1.0 - v))
}

/// Per-element multipliers recorded at forward time: 0 for dropped entries,
/// 1/(1-rate) for kept ones (inverted dropout).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scale: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

/// Training-mode dropout. Elements are visited in row-major order, each
/// drawing one uniform sample from `rng`; an element is kept when the draw
/// is >= `rate`. Kept activations are scaled by 1/(1-rate) so the expected
/// value matches inference, where dropout is skipped entirely.
pub fn dropout_forward<R: Rng + ?Sized>(x: &Tensor2, rate: f64, rng: &mut R) -> (Tensor2, DropoutMask) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    let keep_scale = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = x
        .as_slice()
        .iter()
        .map(|_| {
            let u: f64 = rng.random();
            if u >= rate {
                keep_scale
            } else {
                0.0
            }
        })
        .collect();
    let data: Vec<f64> = x.as_slice().iter().zip(&scale).map(|(v, s)| v * s).collect();
    let out = Tensor2::from_vec(x.rows(), x.cols(), data);
    (out, DropoutMask { scale, rows: x.rows(), cols: x.cols() })
}

/// Mode-aware wrapper: training mode samples a mask, inference is the
/// identity and draws nothing from `rng`.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor2,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> (Tensor2, Option<DropoutMask>) {
    if training {
        let (y, mask) = dropout_forward(x, rate, rng);
        (y, Some(mask))
    } else {
        (x.clone(), None)
    }
}

/// Dropout is element-wise linear given the mask, so the backward pass
/// reapplies the recorded multipliers.
pub fn dropout_backward(grad_out: &Tensor2, mask: &DropoutMask) -> Tensor2 {
    assert_eq!(grad_out.rows(), mask.rows);
    assert_eq!(grad_out.cols(), mask.cols);
    let data: Vec<f64> =
        grad_out.as_slice().iter().zip(&mask.scale).map(|(g, s)| g * s).collect();
    Tensor2::from_vec(grad_out.rows(), grad_out.cols(), data)
}

/// Column-wise mean over rows, collapsing an n x f matrix to 1 x f. An
/// empty input (n = 0) pools to the zero vector, which is how frames with
/// no surviving points flow through the network.
pub fn global_mean_pool(x: &Tensor2, cols: usize) -> Tensor2 {
    if x.rows() == 0 {
        return Tensor2::zeros(1, cols);
    }
    assert_eq!(x.cols(), cols);
    let n = x.rows() as f64;
    let mut out = Tensor2::zeros(1, cols);
    for i in 0..x.rows() {
        for (acc, v) in out.as_mut_slice().iter_mut().zip(x.row(i)) {
            *acc += v;
        }
    }
    for v in out.as_mut_slice() {
        *v /= n;
    }
    out
}

/// Gradient of mean pooling: each of the n input rows receives grad/n. For
/// n = 0 the pooled output was a constant, so the gradient vanishes and an
/// empty matrix comes back.
pub fn global_mean_pool_backward(grad_out: &Tensor2, n_rows: usize) -> Tensor2 {
    assert_eq!(grad_out.rows(), 1);
    if n_rows == 0 {
        return Tensor2::zeros(0, grad_out.cols());
    }
    let inv_n = 1.0 / n_rows as f64;
    let mut out = Tensor2::zeros(n_rows, grad_out.cols());
    for i in 0..n_rows {
        for (dst, g) in out.row_mut(i).iter_mut().zip(grad_out.as_slice()) {
            *dst = g * inv_n;
        }
    }
    out
}

/// Max-shifted softmax over a 1 x m row of logits.
pub fn softmax(logits: &Tensor2) -> Tensor2 {
    assert_eq!(logits.rows(), 1);
    let max = logits.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.as_slice().iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor2::from_vec(1, logits.cols(), exps.iter().map(|e| e / sum).collect())
}

/// Cross-entropy of softmax(logits) against a hard label, with its exact
/// gradient softmax - onehot. Loss is computed in log-space off the shifted
/// logits so large magnitudes cannot overflow.
pub fn softmax_cross_entropy(logits: &Tensor2, label: usize) -> (f64, Tensor2) {
    assert_eq!(logits.rows(), 1);
    assert!(label < logits.cols(), "label {} out of range for {} classes", label, logits.cols());
    let max = logits.as_slice().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum_exp: f64 =
        logits.as_slice().iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    let loss = log_sum_exp - logits.get(0, label);
    let mut grad = softmax(logits);
    *grad.row_mut(0).get_mut(label).unwrap() -= 1.0;
    (loss, grad)
}
