//! Adam optimizer over named parameter blocks.

use serde::{Deserialize, Serialize};

/// Moment estimates for a fixed list of parameter blocks. The step counter
/// is global: `begin_step` advances it once, then every block is updated
/// with the same bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, block_sizes: &[usize]) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: block_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.m.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.m.iter().map(Vec::len).collect()
    }

    /// Call once per optimizer step, before the per-block updates.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Applies the update `theta -= lr * m_hat / (sqrt(v_hat) + eps)` to one
    /// block in place.
    pub fn update_block(&mut self, block: usize, params: &mut [f64], grads: &[f64]) {
        assert!(self.step >= 1, "begin_step must run before update_block");
        assert_eq!(params.len(), self.m[block].len(), "block {} size changed", block);
        assert_eq!(params.len(), grads.len());
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let m = &mut self.m[block];
        let v = &mut self.v[block];
        for k in 0..params.len() {
            let g = grads[k];
            m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g;
            v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g * g;
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            params[k] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    /// Raw first-moment view, for tests and checkpoint inspection.
    pub fn moment1(&self, block: usize) -> &[f64] {
        &self.m[block]
    }

    pub fn moment2(&self, block: usize) -> &[f64] {
        &self.v[block]
    }
}
