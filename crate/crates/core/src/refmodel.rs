//! Logistic-regression reference model.
//!
//! Trains on bias-extended hidden states with (mini-)batch gradient descent
//! on binary cross-entropy and records everything the representation
//! extractors need: per-epoch weight checkpoints, per-epoch learning rates,
//! and full-dataset probability/loss trajectories.
//!
//! Conventions:
//! - the bias is folded into the weight vector by appending a constant-1
//!   feature, so the signed margin is exactly `z = y·wᵀh`;
//! - weights start at zero, which puts every instance at p = 0.5 before the
//!   first epoch;
//! - checkpoint `t` (1-based) is the weight vector after epoch `t`;
//!   checkpoint 0 is the zero initialization.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::Dataset;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{dot, Matrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Instances per gradient step; values ≥ N mean full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl TrainConfig {
    /// Defaults for the bundled synthetic experiment: full batch, lr 0.1,
    /// 15 epochs.
    pub fn synthetic_default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 0.1,
            batch_size: usize::MAX,
            seed: 0,
            shuffle: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be ≥ 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be ≥ 1"));
        }
        Ok(())
    }
}

/// Numerically stable σ(z) = 1/(1+e^(−z)).
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable ln(1+e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Signed, weight-scaled margin `z = y·wᵀh` of a (bias-extended) hidden state.
pub fn signed_margin(w: &[f64], h: &[f64], y: Label) -> Result<f64> {
    if w.len() != h.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: weight {} vs hidden state {}",
            w.len(),
            h.len()
        )));
    }
    Ok(y.sign() * dot(w, h))
}

/// Prediction probability of the correct class, `p = σ(z)`.
pub fn predict_prob(w: &[f64], h: &[f64], y: Label) -> Result<f64> {
    Ok(sigmoid(signed_margin(w, h, y)?))
}

/// Binary cross-entropy of the correct class, `ℓ = −log p = ln(1+e^(−z))`.
pub fn bce_loss(w: &[f64], h: &[f64], y: Label) -> Result<f64> {
    Ok(softplus(-signed_margin(w, h, y)?))
}

/// Closed-form gradient of the loss w.r.t. the classifier weights:
/// `∇_w ℓ = −y·h/(1+e^z)`.
pub fn classifier_gradient(w: &[f64], h: &[f64], y: Label) -> Result<Vec<f64>> {
    let z = signed_margin(w, h, y)?;
    let coef = -y.sign() * sigmoid(-z);
    Ok(h.iter().map(|&hk| coef * hk).collect())
}

/// Per-epoch record of a reference-model training run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointTrace {
    row_ids: Vec<u64>,
    /// `epochs + 1` vectors: index 0 is the initialization, index t the
    /// weights after epoch t. Dimension is d_h + 1 (bias folded).
    weights: Vec<Vec<f64>>,
    lr_per_epoch: Vec<f64>,
    prob_trajectory: Matrix,
    loss_trajectory: Matrix,
}

impl CheckpointTrace {
    pub fn new(
        row_ids: Vec<u64>,
        weights: Vec<Vec<f64>>,
        lr_per_epoch: Vec<f64>,
        prob_trajectory: Matrix,
        loss_trajectory: Matrix,
    ) -> Result<Self> {
        let epochs = lr_per_epoch.len();
        if weights.len() != epochs + 1 {
            return Err(Error::validation(format!(
                "{} weight checkpoints do not match {epochs} epochs",
                weights.len()
            )));
        }
        let dim = weights.first().map_or(0, Vec::len);
        if dim == 0 || weights.iter().any(|w| w.len() != dim) {
            return Err(Error::validation("checkpoint weight dimensions disagree"));
        }
        if weights.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite checkpoint weight"));
        }
        if lr_per_epoch.iter().any(|lr| !(*lr > 0.0)) {
            return Err(Error::validation("every η_t must be positive"));
        }
        let n = row_ids.len();
        for (name, m) in [("prob", &prob_trajectory), ("loss", &loss_trajectory)] {
            if m.rows() != n || m.cols() != epochs {
                return Err(Error::validation(format!(
                    "{name} trajectory is {}x{}, expected {n}x{epochs}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        for (p, l) in prob_trajectory.data().iter().zip(loss_trajectory.data()) {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::validation(format!("probability {p} outside [0, 1]")));
            }
            if *l < 0.0 || !l.is_finite() {
                return Err(Error::validation(format!("invalid loss value {l}")));
            }
            // Consistency ℓ = −log p. The tolerance is 1e−6 absolute, widened
            // proportionally for large losses so float32 round trips of
            // near-zero probabilities still validate.
            let expected = -p.max(f64::MIN_POSITIVE).ln();
            if (l - expected).abs() > 1e-6 * l.abs().max(1.0) {
                return Err(Error::validation(format!(
                    "trajectories inconsistent: loss {l} vs −log p {expected}"
                )));
            }
        }
        Ok(CheckpointTrace {
            row_ids,
            weights,
            lr_per_epoch,
            prob_trajectory,
            loss_trajectory,
        })
    }

    pub fn epochs(&self) -> usize {
        self.lr_per_epoch.len()
    }

    pub fn instances(&self) -> usize {
        self.row_ids.len()
    }

    /// Weight dimension d_h + 1 (bias folded in).
    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    /// Weights after epoch `t`; `t = 0` is the initialization.
    pub fn weights_at(&self, t: usize) -> &[f64] {
        &self.weights[t]
    }

    pub fn final_weights(&self) -> &[f64] {
        self.weights.last().expect("≥ 1 checkpoint")
    }

    /// Average learning rate of epoch `t` (1-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        self.lr_per_epoch[t - 1]
    }

    pub fn lr_per_epoch(&self) -> &[f64] {
        &self.lr_per_epoch
    }

    pub fn prob_trajectory(&self) -> &Matrix {
        &self.prob_trajectory
    }

    pub fn loss_trajectory(&self) -> &Matrix {
        &self.loss_trajectory
    }
}

/// Evaluates per-instance probability and loss of `dataset` under fixed
/// weights (one column of a trajectory).
fn evaluate_epoch(features_ext: &Matrix, labels: &[Label], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut probs = Vec::with_capacity(labels.len());
    let mut losses = Vec::with_capacity(labels.len());
    for (row, &y) in features_ext.row_iter().zip(labels) {
        let z = y.sign() * dot(w, row);
        probs.push(sigmoid(z));
        losses.push(softplus(-z));
    }
    (probs, losses)
}

/// Trains the reference model and records the full trace. Deterministic for a
/// fixed `(dataset, cfg)`.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<CheckpointTrace> {
    cfg.validate()?;
    let n = dataset.len();
    let features_ext = dataset.features().with_bias_column();
    let labels = dataset.labels();
    let dim = features_ext.cols();

    let mut w = vec![0.0; dim];
    let mut weights = Vec::with_capacity(cfg.epochs + 1);
    weights.push(w.clone());

    let mut prob_cols: Vec<Vec<f64>> = Vec::with_capacity(cfg.epochs);
    let mut loss_cols: Vec<Vec<f64>> = Vec::with_capacity(cfg.epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch = cfg.batch_size.min(n);

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; dim];
            for &i in chunk {
                let h = features_ext.row(i);
                let z = labels[i].sign() * dot(&w, h);
                let coef = -labels[i].sign() * sigmoid(-z);
                for (g, &hk) in grad.iter_mut().zip(h) {
                    *g += coef * hk;
                }
            }
            let scale = cfg.learning_rate / chunk.len() as f64;
            for (wk, g) in w.iter_mut().zip(&grad) {
                *wk -= scale * g;
            }
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training {
                epoch,
                msg: "non-finite weights (learning rate too large?)".into(),
            });
        }
        let (probs, losses) = evaluate_epoch(&features_ext, labels, &w);
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(Error::Training {
                epoch,
                msg: "non-finite loss (learning rate too large?)".into(),
            });
        }
        weights.push(w.clone());
        prob_cols.push(probs);
        loss_cols.push(losses);
    }

    let mut prob = Matrix::zeros(n, cfg.epochs);
    let mut loss = Matrix::zeros(n, cfg.epochs);
    for (t, (pc, lc)) in prob_cols.iter().zip(&loss_cols).enumerate() {
        for i in 0..n {
            prob.set(i, t, pc[i]);
            loss.set(i, t, lc[i]);
        }
    }

    CheckpointTrace::new(
        dataset.ids().to_vec(),
        weights,
        vec![cfg.learning_rate; cfg.epochs],
        prob,
        loss,
    )
}

// ── trace serialization (core representation format, named arrays) ─────────

#[derive(Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct TraceMetaFile {
    dtype: String,
    order: String,
    epochs: usize,
    dim: usize,
    instances: usize,
    row_ids: Vec<u64>,
    arrays: Vec<ArrayMeta>,
}

pub fn save_trace(
    trace: &CheckpointTrace,
    meta_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<()> {
    let t = trace.epochs();
    let meta = TraceMetaFile {
        dtype: "f32".into(),
        order: "row-major".into(),
        epochs: t,
        dim: trace.dim(),
        instances: trace.instances(),
        row_ids: trace.row_ids().to_vec(),
        arrays: vec![
            ArrayMeta { name: "weights".into(), rows: t + 1, cols: trace.dim() },
            ArrayMeta { name: "lr_per_epoch".into(), rows: 1, cols: t },
            ArrayMeta { name: "prob_trajectory".into(), rows: trace.instances(), cols: t },
            ArrayMeta { name: "loss_trajectory".into(), rows: trace.instances(), cols: t },
        ],
    };
    io::write_json(&meta, meta_path)?;

    let mut payload: Vec<f64> = Vec::new();
    for w in &trace.weights {
        payload.extend_from_slice(w);
    }
    payload.extend_from_slice(&trace.lr_per_epoch);
    payload.extend_from_slice(trace.prob_trajectory.data());
    payload.extend_from_slice(trace.loss_trajectory.data());
    io::write_f32_payload(&payload, data_path)
}

pub fn load_trace(
    meta_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<CheckpointTrace> {
    let meta: TraceMetaFile = io::read_json(&meta_path)?;
    if meta.dtype != "f32" || meta.order != "row-major" {
        return Err(Error::validation(
            "trace payload must be f32 row-major".to_string(),
        ));
    }
    let expected: [(&str, usize, usize); 4] = [
        ("weights", meta.epochs + 1, meta.dim),
        ("lr_per_epoch", 1, meta.epochs),
        ("prob_trajectory", meta.instances, meta.epochs),
        ("loss_trajectory", meta.instances, meta.epochs),
    ];
    if meta.arrays.len() != expected.len()
        || meta
            .arrays
            .iter()
            .zip(&expected)
            .any(|(a, (n, r, c))| a.name != *n || a.rows != *r || a.cols != *c)
    {
        return Err(Error::validation("trace meta arrays do not match shape fields"));
    }
    let total: usize = expected.iter().map(|(_, r, c)| r * c).sum();
    let payload = io::read_f32_payload(&data_path, total)?;

    let mut offset = 0;
    let mut take = |count: usize| {
        let slice = payload[offset..offset + count].to_vec();
        offset += count;
        slice
    };
    let weights: Vec<Vec<f64>> = (0..meta.epochs + 1).map(|_| take(meta.dim)).collect();
    let lr = take(meta.epochs);
    let prob = Matrix::from_vec(meta.instances, meta.epochs, take(meta.instances * meta.epochs));
    let loss = Matrix::from_vec(meta.instances, meta.epochs, take(meta.instances * meta.epochs));
    CheckpointTrace::new(meta.row_ids, weights, lr, prob, loss)
}
