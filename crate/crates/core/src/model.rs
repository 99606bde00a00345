//! The DDGNN: per-frame spatial feature extraction (linear projection +
//! two GraphConv layers + dropout + global mean pooling) feeding a stacked
//! Bi-LSTM and a linear classifier, with batch-size-1 Adam training and
//! accuracy-based early stopping.

use crate::graph::{FrameGraph, GraphConfig, GraphSequence};
use crate::nn::{
    dropout_backward, dropout_forward, global_mean_pool, global_mean_pool_backward, softmax,
    softmax_cross_entropy, AdamState, BiLstm, BiLstmCache, DropoutMask, GraphConv,
    GraphConvCache, Linear, LinearCache, Tensor2,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sequence has {got} frames, model expects {want}")]
    SequenceLength { got: usize, want: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdgnnConfig {
    pub classes: usize,
    pub seq_len: usize,
    pub fc_dim: usize,
    pub gcn_dims: [usize; 2],
    pub lstm_hidden: usize,
    pub dropout_rate: f64,
    pub lr: f64,
    pub seed: u64,
    /// Run validation every this many epochs.
    pub validate_every: usize,
    /// Stop after this many consecutive validation rounds without
    /// improvement (0 = stop after the first round).
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for DdgnnConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            seq_len: 50,
            fc_dim: 64,
            gcn_dims: [32, 16],
            lstm_hidden: 64,
            dropout_rate: 0.3,
            lr: 0.001,
            seed: 42,
            validate_every: 5,
            patience: 10,
            max_epochs: 100,
        }
    }
}

impl DdgnnConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.classes < 2 {
            return bad(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.seq_len < 1 {
            return bad("seq_len must be >= 1".into());
        }
        if self.fc_dim < 1 || self.gcn_dims.iter().any(|&d| d < 1) || self.lstm_hidden < 1 {
            return bad("layer dims must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate must be in [0,1), got {}", self.dropout_rate));
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.validate_every < 1 {
            return bad("validate_every must be >= 1".into());
        }
        if self.max_epochs < 1 {
            return bad("max_epochs must be >= 1".into());
        }
        Ok(())
    }
}

const LSTM_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdgnnModel {
    pub config: DdgnnConfig,
    pub proj: Linear,
    pub gc1: GraphConv,
    pub gc2: GraphConv,
    pub lstm: BiLstm,
    pub cls: Linear,
}

struct FrameCache {
    lin: LinearCache,
    g1: GraphConvCache,
    g2: GraphConvCache,
    mask: Option<DropoutMask>,
    node_count: usize,
}

struct ForwardCache {
    frames: Vec<FrameCache>,
    lstm: BiLstmCache,
    cls: LinearCache,
}

impl DdgnnModel {
    pub fn init(config: DdgnnConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let proj = Linear::init(3, config.fc_dim, &mut rng);
        let gc1 = GraphConv::init(config.fc_dim, config.gcn_dims[0], &mut rng);
        let gc2 = GraphConv::init(config.gcn_dims[0], config.gcn_dims[1], &mut rng);
        let lstm = BiLstm::init(config.gcn_dims[1], config.lstm_hidden, LSTM_LAYERS, &mut rng);
        let cls = Linear::init(2 * config.lstm_hidden, config.classes, &mut rng);
        Ok(Self { config, proj, gc1, gc2, lstm, cls })
    }

    /// Checks the dimension chain 3 → fc → gcn[0] → gcn[1] → lstm → classes
    /// and that every tensor is finite; used when loading checkpoints.
    pub fn validate(&self) -> Result<(), ModelError> {
        self.config.validate()?;
        let c = &self.config;
        let expect = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(ModelError::Checkpoint(format!("inconsistent shape: {what}")))
            }
        };
        expect(self.proj.weight.shape() == (c.fc_dim, 3), "proj.weight")?;
        expect(self.proj.bias.shape() == (1, c.fc_dim), "proj.bias")?;
        expect(self.gc1.w1.shape() == (c.gcn_dims[0], c.fc_dim), "gc1")?;
        expect(self.gc1.w2.shape() == self.gc1.w1.shape(), "gc1.w2")?;
        expect(self.gc2.w1.shape() == (c.gcn_dims[1], c.gcn_dims[0]), "gc2")?;
        expect(self.gc2.w2.shape() == self.gc2.w1.shape(), "gc2.w2")?;
        expect(self.lstm.layers.len() == LSTM_LAYERS, "lstm layer count")?;
        expect(self.lstm.hidden_size == c.lstm_hidden, "lstm hidden size")?;
        for (l, layer) in self.lstm.layers.iter().enumerate() {
            let in_dim = if l == 0 { c.gcn_dims[1] } else { 2 * c.lstm_hidden };
            for p in [&layer.fwd, &layer.bwd] {
                expect(p.w_ih.shape() == (4 * c.lstm_hidden, in_dim), "lstm w_ih")?;
                expect(p.w_hh.shape() == (4 * c.lstm_hidden, c.lstm_hidden), "lstm w_hh")?;
                expect(p.bias.shape() == (1, 4 * c.lstm_hidden), "lstm bias")?;
            }
        }
        expect(self.cls.weight.shape() == (c.classes, 2 * c.lstm_hidden), "cls.weight")?;
        expect(self.cls.bias.shape() == (1, c.classes), "cls.bias")?;
        for (name, t) in self.named_params() {
            t.validate().map_err(|e| ModelError::Checkpoint(format!("{name}: {e}")))?;
        }
        Ok(())
    }

    /// Parameter tensors in the fixed block order used by the optimizer,
    /// gradients, and checkpoints.
    pub fn named_params(&self) -> Vec<(String, &Tensor2)> {
        let mut out: Vec<(String, &Tensor2)> = vec![
            ("proj.weight".into(), &self.proj.weight),
            ("proj.bias".into(), &self.proj.bias),
            ("gc1.w1".into(), &self.gc1.w1),
            ("gc1.w2".into(), &self.gc1.w2),
            ("gc2.w1".into(), &self.gc2.w1),
            ("gc2.w2".into(), &self.gc2.w2),
        ];
        for (l, layer) in self.lstm.layers.iter().enumerate() {
            for (dir, p) in [("fwd", &layer.fwd), ("bwd", &layer.bwd)] {
                out.push((format!("lstm.l{l}.{dir}.w_ih"), &p.w_ih));
                out.push((format!("lstm.l{l}.{dir}.w_hh"), &p.w_hh));
                out.push((format!("lstm.l{l}.{dir}.bias"), &p.bias));
            }
        }
        out.push(("cls.weight".into(), &self.cls.weight));
        out.push(("cls.bias".into(), &self.cls.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out: Vec<&mut Tensor2> = vec![
            &mut self.proj.weight,
            &mut self.proj.bias,
            &mut self.gc1.w1,
            &mut self.gc1.w2,
            &mut self.gc2.w1,
            &mut self.gc2.w2,
        ];
        for layer in self.lstm.layers.iter_mut() {
            out.push(&mut layer.fwd.w_ih);
            out.push(&mut layer.fwd.w_hh);
            out.push(&mut layer.fwd.bias);
            out.push(&mut layer.bwd.w_ih);
            out.push(&mut layer.bwd.w_hh);
            out.push(&mut layer.bwd.bias);
        }
        out.push(&mut self.cls.weight);
        out.push(&mut self.cls.bias);
        out
    }

    pub fn block_layout(&self) -> Vec<(String, usize)> {
        self.named_params().into_iter().map(|(n, t)| (n, t.as_slice().len())).collect()
    }

    pub fn num_params(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.as_slice().len()).sum()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.num_params());
        for (_, t) in self.named_params() {
            flat.extend_from_slice(t.as_slice());
        }
        flat
    }

    pub fn load_flat_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut offset = 0;
        for t in self.params_mut() {
            let len = t.as_slice().len();
            t.as_mut_slice().copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
    }

    fn spatial_cached<R: Rng + ?Sized>(
        &self,
        g: &FrameGraph,
        training: bool,
        rng: &mut R,
    ) -> (Tensor2, FrameCache) {
        let h0 = g.feature_matrix();
        let (h1, lin) = self.proj.forward(&h0);
        let (h2, g1) = self.gc1.forward(&h1, &g.neighbor_sets, true);
        let (h3, g2) = self.gc2.forward(&h2, &g.neighbor_sets, true);
        let (h4, mask) = if training && self.config.dropout_rate > 0.0 {
            let (y, m) = dropout_forward(&h3, self.config.dropout_rate, rng);
            (y, Some(m))
        } else {
            (h3, None)
        };
        let pooled = global_mean_pool(&h4, self.config.gcn_dims[1]);
        (pooled, FrameCache { lin, g1, g2, mask, node_count: g.node_count() })
    }

    /// Per-frame spatial feature (1 × gcn_dims[1]); a zero-node graph pools
    /// to the zero vector.
    pub fn spatial_forward<R: Rng + ?Sized>(
        &self,
        g: &FrameGraph,
        training: bool,
        rng: &mut R,
    ) -> Tensor2 {
        self.spatial_cached(g, training, rng).0
    }

    fn forward_cached<R: Rng + ?Sized>(
        &self,
        gs: &GraphSequence,
        training: bool,
        rng: &mut R,
    ) -> Result<(Tensor2, ForwardCache), ModelError> {
        if gs.len() != self.config.seq_len {
            return Err(ModelError::SequenceLength { got: gs.len(), want: self.config.seq_len });
        }
        let d = self.config.gcn_dims[1];
        let mut v = Tensor2::zeros(gs.len(), d);
        let mut frames = Vec::with_capacity(gs.len());
        for (t, g) in gs.graphs.iter().enumerate() {
            let (pooled, cache) = self.spatial_cached(g, training, rng);
            v.row_mut(t).copy_from_slice(pooled.as_slice());
            frames.push(cache);
        }
        let (feat, lstm) = self.lstm.forward(&v);
        let (logits, cls) = self.cls.forward(&feat);
        Ok((logits, ForwardCache { frames, lstm, cls }))
    }

    /// Raw logits (1 × classes) for a graph sequence.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        gs: &GraphSequence,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor2, ModelError> {
        Ok(self.forward_cached(gs, training, rng)?.0)
    }

    /// Inference-mode logits; dropout off, no randomness involved.
    pub fn infer_logits(&self, gs: &GraphSequence) -> Result<Tensor2, ModelError> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.forward(gs, false, &mut unused)
    }

    /// Loss plus gradients for every parameter block, in `named_params`
    /// order.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &self,
        gs: &GraphSequence,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, Vec<Tensor2>), ModelError> {
        if gs.label >= self.config.classes {
            return Err(ModelError::LabelOutOfRange {
                label: gs.label,
                classes: self.config.classes,
            });
        }
        let (logits, cache) = self.forward_cached(gs, training, rng)?;
        let (loss, grad_logits) = softmax_cross_entropy(&logits, gs.label);

        let (grad_feat, gw_cls, gb_cls) = self.cls.backward(&grad_logits, &cache.cls);
        let (grad_v, lstm_grads) = self.lstm.backward(&grad_feat, &cache.lstm);

        let mut g_proj_w = Tensor2::zeros(self.proj.weight.rows(), self.proj.weight.cols());
        let mut g_proj_b = Tensor2::zeros(1, self.proj.bias.cols());
        let mut g_gc1_w1 = Tensor2::zeros(self.gc1.w1.rows(), self.gc1.w1.cols());
        let mut g_gc1_w2 = g_gc1_w1.clone();
        let mut g_gc2_w1 = Tensor2::zeros(self.gc2.w1.rows(), self.gc2.w1.cols());
        let mut g_gc2_w2 = g_gc2_w1.clone();

        for (t, frame) in cache.frames.iter().enumerate() {
            let grad_pooled = Tensor2::from_row(grad_v.row(t));
            let mut grad = global_mean_pool_backward(&grad_pooled, frame.node_count);
            if let Some(mask) = &frame.mask {
                grad = dropout_backward(&grad, mask);
            }
            let neighbors = &gs.graphs[t].neighbor_sets;
            let (grad_h2, w1, w2) = self.gc2.backward(&grad, &frame.g2, neighbors);
            g_gc2_w1.add_assign(&w1);
            g_gc2_w2.add_assign(&w2);
            let (grad_h1, w1, w2) = self.gc1.backward(&grad_h2, &frame.g1, neighbors);
            g_gc1_w1.add_assign(&w1);
            g_gc1_w2.add_assign(&w2);
            let (_, gw, gb) = self.proj.backward(&grad_h1, &frame.lin);
            g_proj_w.add_assign(&gw);
            g_proj_b.add_assign(&gb);
        }

        let mut grads = vec![g_proj_w, g_proj_b, g_gc1_w1, g_gc1_w2, g_gc2_w1, g_gc2_w2];
        for layer in lstm_grads {
            grads.push(layer.fwd.w_ih);
            grads.push(layer.fwd.w_hh);
            grads.push(layer.fwd.bias);
            grads.push(layer.bwd.w_ih);
            grads.push(layer.bwd.w_hh);
            grads.push(layer.bwd.bias);
        }
        grads.push(gw_cls);
        grads.push(gb_cls);
        Ok((loss, grads))
    }

    /// Softmax probabilities and the argmax class (lowest index on ties).
    pub fn predict(&self, gs: &GraphSequence) -> Result<(usize, Vec<f64>), ModelError> {
        let logits = self.infer_logits(gs)?;
        let probs = softmax(&logits);
        let mut best = 0;
        for k in 1..probs.cols() {
            if probs.get(0, k) > probs.get(0, best) {
                best = k;
            }
        }
        Ok((best, probs.as_slice().to_vec()))
    }

    pub fn evaluate(&self, test: &[GraphSequence]) -> Result<EvalReport, ModelError> {
        if test.is_empty() {
            return Err(ModelError::EmptyDataset("evaluation"));
        }
        let m = self.config.classes;
        let mut confusion = vec![vec![0u64; m]; m];
        let mut total_ms = 0.0;
        for gs in test {
            if gs.label >= m {
                return Err(ModelError::LabelOutOfRange { label: gs.label, classes: m });
            }
            let start = Instant::now();
            let (pred, _) = self.predict(gs)?;
            total_ms += start.elapsed().as_secs_f64() * 1e3;
            confusion[gs.label][pred] += 1;
        }
        let total = test.len() as f64;
        let correct: u64 = (0..m).map(|i| confusion[i][i]).sum();
        let per_class_accuracy = (0..m)
            .map(|i| {
                let row: u64 = confusion[i].iter().sum();
                if row == 0 {
                    0.0
                } else {
                    confusion[i][i] as f64 / row as f64
                }
            })
            .collect();
        Ok(EvalReport {
            overall_accuracy: correct as f64 / total,
            per_class_accuracy,
            confusion,
            avg_inference_ms: total_ms / total,
        })
    }

    /// Batch-size-1 Adam training with seeded shuffling, periodic
    /// validation, and best-checkpoint restore. The model ends up holding
    /// the parameters of its best validation round.
    pub fn train(
        &mut self,
        train: &[GraphSequence],
        val: &[GraphSequence],
    ) -> Result<TrainOutcome, ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyDataset("train"));
        }
        if val.is_empty() {
            return Err(ModelError::EmptyDataset("validation"));
        }
        let config = self.config;
        let sizes: Vec<usize> = self.block_layout().into_iter().map(|(_, n)| n).collect();
        let mut adam = AdamState::new(config.lr, &sizes);

        let mut log: Vec<TrainLogRow> = Vec::new();
        let mut best_params: Option<Vec<f64>> = None;
        let mut best_val_acc = f64::NEG_INFINITY;
        let mut best_epoch = 0;
        let mut stale_rounds = 0;
        let mut stopped_early = false;
        let mut epochs_run = 0;

        for epoch in 1..=config.max_epochs {
            epochs_run = epoch;
            let mut order: Vec<usize> = (0..train.len()).collect();
            let mut shuffle_rng =
                ChaCha8Rng::seed_from_u64(derive_stream(config.seed, epoch as u64, 0));
            order.shuffle(&mut shuffle_rng);

            let mut loss_sum = 0.0;
            for (pos, &idx) in order.iter().enumerate() {
                let mut sample_rng = ChaCha8Rng::seed_from_u64(derive_stream(
                    config.seed,
                    epoch as u64,
                    1 + pos as u64,
                ));
                let (loss, grads) = self.loss_and_grads(&train[idx], true, &mut sample_rng)?;
                loss_sum += loss;
                adam.begin_step();
                for (b, (param, grad)) in self.params_mut().into_iter().zip(&grads).enumerate() {
                    adam.update_block(b, param.as_mut_slice(), grad.as_slice());
                }
            }
            let train_loss = loss_sum / train.len() as f64;

            let mut val_acc = None;
            if epoch % config.validate_every == 0 {
                let acc = self.evaluate(val)?.overall_accuracy;
                val_acc = Some(acc);
                if acc > best_val_acc {
                    best_val_acc = acc;
                    best_epoch = epoch;
                    best_params = Some(self.flatten_params());
                    stale_rounds = 0;
                } else {
                    stale_rounds += 1;
                }
            }
            log.push(TrainLogRow { epoch, train_loss, val_acc });
            if val_acc.is_some() && stale_rounds >= config.patience {
                stopped_early = true;
                break;
            }
        }

        // a run shorter than validate_every never validated; score the
        // final parameters so the outcome is still meaningful
        if best_params.is_none() {
            best_val_acc = self.evaluate(val)?.overall_accuracy;
            best_epoch = epochs_run;
            best_params = Some(self.flatten_params());
        }
        self.load_flat_params(&best_params.expect("set above"));
        Ok(TrainOutcome { log, best_val_acc, best_epoch, epochs_run, stopped_early })
    }
}

/// Two-level splitmix64 mix: distinct (epoch, stream) pairs get
/// decorrelated RNG seeds from one user seed.
fn derive_stream(seed: u64, a: u64, b: u64) -> u64 {
    let mut x = seed ^ splitmix64(a.wrapping_add(0x9E37_79B9_7F4A_7C15)) ^ splitmix64(b);
    x = splitmix64(x);
    x
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub log: Vec<TrainLogRow>,
    pub best_val_acc: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    /// CSV body: `epoch,train_loss,val_acc` with val_acc blank on epochs
    /// without a validation round.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_acc\n");
        for row in &self.log {
            let val = row.val_acc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", row.epoch, row.train_loss, val));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub avg_inference_ms: f64,
}

impl EvalReport {
    /// Confusion matrix as CSV, row = true class, column = prediction.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing JSON checkpoint: format version, full model (config +
/// parameters), the graph construction recipe it was trained with, and
/// optionally the Adam state for exact training resumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: DdgnnModel,
    pub graph: Option<GraphConfig>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(model: DdgnnModel, graph: Option<GraphConfig>) -> Self {
        Self { version: CHECKPOINT_VERSION, model, graph, adam: None }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| ModelError::Checkpoint(format!("parse: {e}")))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {} (expected {})",
                ckpt.version, CHECKPOINT_VERSION
            )));
        }
        ckpt.model.validate()?;
        Ok(ckpt)
    }
}
