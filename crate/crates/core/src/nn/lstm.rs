//! Stacked bidirectional LSTM over a feature sequence, with hand-rolled
//! backpropagation through time.
//!
//! Gate layout inside the packed weights is `[i, f, g, o]` (input, forget,
//! cell candidate, output), each slice `hidden` rows tall:
//!
//! ```text
//! pre = W_ih x_t + W_hh h_prev + b
//! c_t = f . c_prev + i . g        h_t = o . tanh(c_t)
//! ```
//!
//! The sequence feature is the concatenation of the top layer's forward
//! hidden state at the last step and backward hidden state at the first
//! step, i.e. the two states that have each seen the whole sequence.

use super::linear::glorot_bound;
use super::ops::sigmoid_scalar;
use super::tensor::Tensor2;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

/// One direction of one layer. `w_ih` is (4h x in), `w_hh` (4h x h),
/// `bias` (1 x 4h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayerParams {
    pub w_ih: Tensor2,
    pub w_hh: Tensor2,
    pub bias: Tensor2,
}

impl LstmLayerParams {
    pub fn init<R: Rng + ?Sized>(in_features: usize, hidden: usize, rng: &mut R) -> Self {
        let ih_bound = glorot_bound(in_features, 4 * hidden);
        let hh_bound = glorot_bound(hidden, 4 * hidden);
        let w_ih = Tensor2::from_vec(
            4 * hidden,
            in_features,
            (0..4 * hidden * in_features).map(|_| rng.random_range(-ih_bound..=ih_bound)).collect(),
        );
        let w_hh = Tensor2::from_vec(
            4 * hidden,
            hidden,
            (0..4 * hidden * hidden).map(|_| rng.random_range(-hh_bound..=hh_bound)).collect(),
        );
        // forget-gate bias starts at 1 so early training does not flush the cell
        let mut bias = Tensor2::zeros(1, 4 * hidden);
        for k in hidden..2 * hidden {
            bias.set(0, k, 1.0);
        }
        Self { w_ih, w_hh, bias }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_ih: Tensor2::zeros(self.w_ih.rows(), self.w_ih.cols()),
            w_hh: Tensor2::zeros(self.w_hh.rows(), self.w_hh.cols()),
            bias: Tensor2::zeros(1, self.bias.cols()),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn in_features(&self) -> usize {
        self.w_ih.cols()
    }
}

/// Both directions of one stacked layer. Doubles as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmLayer {
    pub fwd: LstmLayerParams,
    pub bwd: LstmLayerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub layers: Vec<BiLstmLayer>,
    pub hidden_size: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Direction {
    Fwd,
    Bwd,
}

impl Direction {
    /// Time index visited at scan position `s` of an `n`-step sequence.
    fn time_at(self, s: usize, n: usize) -> usize {
        match self {
            Direction::Fwd => s,
            Direction::Bwd => n - 1 - s,
        }
    }
}

/// Per-direction activations, all (N x hidden) and indexed by time step.
#[derive(Debug, Clone)]
pub struct DirectionCache {
    i: Tensor2,
    f: Tensor2,
    g: Tensor2,
    o: Tensor2,
    c: Tensor2,
    h: Tensor2,
    tanh_c: Tensor2,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    layer_inputs: Vec<Tensor2>,
    dir_caches: Vec<(DirectionCache, DirectionCache)>,
    seq_len: usize,
}

impl BiLstm {
    pub fn init<R: Rng + ?Sized>(
        in_features: usize,
        hidden: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        assert!(num_layers >= 1);
        let layers = (0..num_layers)
            .map(|l| {
                let layer_in = if l == 0 { in_features } else { 2 * hidden };
                BiLstmLayer {
                    fwd: LstmLayerParams::init(layer_in, hidden, rng),
                    bwd: LstmLayerParams::init(layer_in, hidden, rng),
                }
            })
            .collect();
        Self { layers, hidden_size: hidden }
    }

    /// Width of the sequence feature: forward plus backward hidden state.
    pub fn feature_size(&self) -> usize {
        2 * self.hidden_size
    }

    fn run_direction(params: &LstmLayerParams, input: &Tensor2, dir: Direction) -> DirectionCache {
        let n = input.rows();
        let h = params.hidden_size();
        let mut cache = DirectionCache {
            i: Tensor2::zeros(n, h),
            f: Tensor2::zeros(n, h),
            g: Tensor2::zeros(n, h),
            o: Tensor2::zeros(n, h),
            c: Tensor2::zeros(n, h),
            h: Tensor2::zeros(n, h),
            tanh_c: Tensor2::zeros(n, h),
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut pre = vec![0.0; 4 * h];
        for s in 0..n {
            let t = dir.time_at(s, n);
            let x = input.row(t);
            for r in 0..4 * h {
                let mut acc = params.bias.get(0, r);
                for (xv, wv) in x.iter().zip(params.w_ih.row(r)) {
                    acc += xv * wv;
                }
                for (hv, wv) in h_prev.iter().zip(params.w_hh.row(r)) {
                    acc += hv * wv;
                }
                pre[r] = acc;
            }
            for k in 0..h {
                let i = sigmoid_scalar(pre[k]);
                let f = sigmoid_scalar(pre[h + k]);
                let g = pre[2 * h + k].tanh();
                let o = sigmoid_scalar(pre[3 * h + k]);
                let c = f * c_prev[k] + i * g;
                let tc = c.tanh();
                cache.i.set(t, k, i);
                cache.f.set(t, k, f);
                cache.g.set(t, k, g);
                cache.o.set(t, k, o);
                cache.c.set(t, k, c);
                cache.tanh_c.set(t, k, tc);
                cache.h.set(t, k, o * tc);
            }
            h_prev.copy_from_slice(cache.h.row(t));
            c_prev.copy_from_slice(cache.c.row(t));
        }
        cache
    }

    /// `x` is the (N x in_features) feature sequence, N >= 1. Returns the
    /// (1 x 2h) sequence feature and the cache for backward.
    pub fn forward(&self, x: &Tensor2) -> (Tensor2, BiLstmCache) {
        assert!(x.rows() >= 1, "empty sequence");
        assert_eq!(x.cols(), self.layers[0].fwd.in_features());
        let n = x.rows();
        let h = self.hidden_size;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut dir_caches = Vec::with_capacity(self.layers.len());
        let mut input = x.clone();
        for layer in &self.layers {
            let fwd = Self::run_direction(&layer.fwd, &input, Direction::Fwd);
            let bwd = Self::run_direction(&layer.bwd, &input, Direction::Bwd);
            let mut next = Tensor2::zeros(n, 2 * h);
            for t in 0..n {
                next.row_mut(t)[..h].copy_from_slice(fwd.h.row(t));
                next.row_mut(t)[h..].copy_from_slice(bwd.h.row(t));
            }
            layer_inputs.push(input);
            dir_caches.push((fwd, bwd));
            input = next;
        }
        let top = dir_caches.last().unwrap();
        let mut feature = Tensor2::zeros(1, 2 * h);
        feature.row_mut(0)[..h].copy_from_slice(top.0.h.row(n - 1));
        feature.row_mut(0)[h..].copy_from_slice(top.1.h.row(0));
        (feature, BiLstmCache { layer_inputs, dir_caches, seq_len: n })
    }

    fn bptt_direction(
        params: &LstmLayerParams,
        cache: &DirectionCache,
        input: &Tensor2,
        dir: Direction,
        upstream_h: &Tensor2,
    ) -> (Tensor2, LstmLayerParams) {
        let n = input.rows();
        let h = params.hidden_size();
        let mut grads = params.zeros_like();
        let mut grad_input = Tensor2::zeros(n, input.cols());
        let mut carry_dh = vec![0.0; h];
        let mut carry_dc = vec![0.0; h];
        let mut dpre = vec![0.0; 4 * h];
        let zeros = vec![0.0; h];
        for s in (0..n).rev() {
            let t = dir.time_at(s, n);
            let prev_t = if s > 0 { Some(dir.time_at(s - 1, n)) } else { None };
            let (h_prev, c_prev): (&[f64], &[f64]) = match prev_t {
                Some(p) => (cache.h.row(p), cache.c.row(p)),
                None => (&zeros, &zeros),
            };
            for k in 0..h {
                let dh = upstream_h.get(t, k) + carry_dh[k];
                let i = cache.i.get(t, k);
                let f = cache.f.get(t, k);
                let g = cache.g.get(t, k);
                let o = cache.o.get(t, k);
                let tc = cache.tanh_c.get(t, k);
                let dc = dh * o * (1.0 - tc * tc) + carry_dc[k];
                dpre[k] = dc * g * i * (1.0 - i);
                dpre[h + k] = dc * c_prev[k] * f * (1.0 - f);
                dpre[2 * h + k] = dc * i * (1.0 - g * g);
                dpre[3 * h + k] = dh * tc * o * (1.0 - o);
                carry_dc[k] = dc * f;
            }
            let x = input.row(t);
            for r in 0..4 * h {
                let d = dpre[r];
                if d == 0.0 {
                    continue;
                }
                for (gw, xv) in grads.w_ih.row_mut(r).iter_mut().zip(x) {
                    *gw += d * xv;
                }
                for (gw, hv) in grads.w_hh.row_mut(r).iter_mut().zip(h_prev) {
                    *gw += d * hv;
                }
                grads.bias.as_mut_slice()[r] += d;
            }
            for k in 0..h {
                carry_dh[k] = 0.0;
            }
            let gx = grad_input.row_mut(t);
            for k in gx.iter_mut() {
                *k = 0.0;
            }
            for r in 0..4 * h {
                let d = dpre[r];
                if d == 0.0 {
                    continue;
                }
                for (gx_v, wv) in gx.iter_mut().zip(params.w_ih.row(r)) {
                    *gx_v += d * wv;
                }
                for (ch, wv) in carry_dh.iter_mut().zip(params.w_hh.row(r)) {
                    *ch += d * wv;
                }
            }
        }
        (grad_input, grads)
    }

    /// Backpropagates the gradient of the (1 x 2h) sequence feature.
    /// Returns the gradient w.r.t. the input sequence and per-layer
    /// parameter gradients (same order as `self.layers`).
    pub fn backward(
        &self,
        grad_feature: &Tensor2,
        cache: &BiLstmCache,
    ) -> (Tensor2, Vec<BiLstmLayer>) {
        let n = cache.seq_len;
        let h = self.hidden_size;
        assert_eq!(grad_feature.shape(), (1, 2 * h));

        // only the top layer's boundary states feed the feature
        let mut up_fwd = Tensor2::zeros(n, h);
        up_fwd.row_mut(n - 1).copy_from_slice(&grad_feature.row(0)[..h]);
        let mut up_bwd = Tensor2::zeros(n, h);
        up_bwd.row_mut(0).copy_from_slice(&grad_feature.row(0)[h..]);

        let mut layer_grads: Vec<BiLstmLayer> = Vec::with_capacity(self.layers.len());
        let mut grad_input = Tensor2::zeros(0, 0);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.layer_inputs[l];
            let (fwd_cache, bwd_cache) = &cache.dir_caches[l];
            let (gx_f, g_fwd) =
                Self::bptt_direction(&layer.fwd, fwd_cache, input, Direction::Fwd, &up_fwd);
            let (gx_b, g_bwd) =
                Self::bptt_direction(&layer.bwd, bwd_cache, input, Direction::Bwd, &up_bwd);
            let mut gx = gx_f;
            gx.add_assign(&gx_b);
            layer_grads.push(BiLstmLayer { fwd: g_fwd, bwd: g_bwd });
            if l > 0 {
                // lower layer's per-step outputs fed this layer at every step
                up_fwd = Tensor2::zeros(n, h);
                up_bwd = Tensor2::zeros(n, h);
                for t in 0..n {
                    up_fwd.row_mut(t).copy_from_slice(&gx.row(t)[..h]);
                    up_bwd.row_mut(t).copy_from_slice(&gx.row(t)[h..]);
                }
            }
            grad_input = gx;
        }
        layer_grads.reverse();
        (grad_input, layer_grads)
    }
}
