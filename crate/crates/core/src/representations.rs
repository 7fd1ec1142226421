//! Extractors for the three representation families: hidden states,
//! training-dynamics trajectories, and per-checkpoint classifier gradients.
//!
//! Gradient blocks are scaled by √η_t (when requested) so that inner products
//! of the stored rows reproduce the η-weighted sums
//! `Σ_t η_t · g_i^{(t)ᵀ} g_j^{(t)}` used by the relevance and self-influence
//! scores, while Euclidean distances on the same matrix remain meaningful for
//! the clustering selectors. One stored artifact serves both.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, RepKind, Representation};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, Matrix};
use crate::refmodel::{sigmoid, softplus, CheckpointTrace};

/// Which trajectory a dynamics representation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsVariant {
    Prob,
    Loss,
}

/// Hidden states are the dataset features themselves (no bias column; theory
/// code extends them on entry).
pub fn hidden_states(dataset: &Dataset) -> Representation {
    Representation::new(
        RepKind::HiddenStates,
        dataset.features().clone(),
        dataset.ids().to_vec(),
        vec![],
        false,
        None,
    )
    .expect("dataset invariants imply representation invariants")
}

/// The stored N×T probability or loss trajectory of the training set.
pub fn dynamics(trace: &CheckpointTrace, variant: DynamicsVariant) -> Representation {
    let (kind, matrix) = match variant {
        DynamicsVariant::Prob => (RepKind::DynamicsProb, trace.prob_trajectory().clone()),
        DynamicsVariant::Loss => (RepKind::DynamicsLoss, trace.loss_trajectory().clone()),
    };
    Representation::new(
        kind,
        matrix,
        trace.row_ids().to_vec(),
        (1..=trace.epochs()).collect(),
        false,
        None,
    )
    .expect("trace invariants imply representation invariants")
}

/// Re-evaluates a trajectory for an arbitrary dataset (e.g. a validation set)
/// under the trace's per-epoch weights.
pub fn evaluate_dynamics(
    trace: &CheckpointTrace,
    dataset: &Dataset,
    variant: DynamicsVariant,
) -> Result<Representation> {
    let ext = dataset.features().with_bias_column();
    if ext.cols() != trace.dim() {
        return Err(Error::validation(format!(
            "dataset dimension {} (with bias) does not match trace dimension {}",
            ext.cols(),
            trace.dim()
        )));
    }
    let t_count = trace.epochs();
    let mut m = Matrix::zeros(dataset.len(), t_count);
    for (i, (row, &y)) in ext.row_iter().zip(dataset.labels()).enumerate() {
        for t in 1..=t_count {
            let z = y.sign() * dot(trace.weights_at(t), row);
            let v = match variant {
                DynamicsVariant::Prob => sigmoid(z),
                DynamicsVariant::Loss => softplus(-z),
            };
            m.set(i, t - 1, v);
        }
    }
    let kind = match variant {
        DynamicsVariant::Prob => RepKind::DynamicsProb,
        DynamicsVariant::Loss => RepKind::DynamicsLoss,
    };
    Representation::new(kind, m, dataset.ids().to_vec(), (1..=t_count).collect(), false, None)
}

/// Concatenated per-checkpoint classifier gradients.
///
/// For each requested epoch `t`, the block for instance `i` is
/// `g_i^{(t)} = −y_i·h̃_i/(1+e^{z_i^{(t)}})` on the bias-extended hidden state;
/// `normalize` unit-normalizes each block before `lr_scale` multiplies it by
/// √η_t. Output shape is N×(|checkpoints|·(d_h+1)).
pub fn gradients(
    trace: &CheckpointTrace,
    dataset: &Dataset,
    checkpoints: &[usize],
    lr_scale: bool,
    normalize: bool,
) -> Result<Representation> {
    if checkpoints.is_empty() {
        return Err(Error::validation("gradients need ≥ 1 checkpoint"));
    }
    for &t in checkpoints {
        if t == 0 || t > trace.epochs() {
            return Err(Error::validation(format!(
                "checkpoint epoch {t} out of range 1..={}",
                trace.epochs()
            )));
        }
    }
    let ext = dataset.features().with_bias_column();
    if ext.cols() != trace.dim() {
        return Err(Error::validation(format!(
            "dataset dimension {} (with bias) does not match trace dimension {}",
            ext.cols(),
            trace.dim()
        )));
    }

    let d = ext.cols();
    let mut m = Matrix::zeros(dataset.len(), checkpoints.len() * d);
    for (i, (row, &y)) in ext.row_iter().zip(dataset.labels()).enumerate() {
        for (b, &t) in checkpoints.iter().enumerate() {
            let w = trace.weights_at(t);
            let z = y.sign() * dot(w, row);
            let coef = -y.sign() * sigmoid(-z);
            let mut block: Vec<f64> = row.iter().map(|&hk| coef * hk).collect();
            if normalize {
                let nb = norm(&block);
                if nb > 0.0 {
                    for v in &mut block {
                        *v /= nb;
                    }
                }
            }
            if lr_scale {
                let s = trace.lr_at(t).sqrt();
                for v in &mut block {
                    *v *= s;
                }
            }
            m.row_mut(i)[b * d..(b + 1) * d].copy_from_slice(&block);
        }
    }
    Representation::new(
        RepKind::Gradients,
        m,
        dataset.ids().to_vec(),
        checkpoints.to_vec(),
        lr_scale,
        None,
    )
}

/// Default checkpoint list: the first five epochs (or all of them for short
/// runs).
pub fn default_checkpoints(epochs: usize) -> Vec<usize> {
    (1..=epochs.min(5)).collect()
}

/// Sparse sign random projection: multiplies by a seeded matrix with i.i.d.
/// entries in {−1,+1}/√target_dim. With `identity_bypass`, a projection to the
/// original dimensionality returns the input unchanged.
pub fn random_project(
    rep: &Representation,
    target_dim: usize,
    seed: u64,
    identity_bypass: bool,
) -> Result<Representation> {
    if target_dim == 0 {
        return Err(Error::validation("target_dim must be ≥ 1"));
    }
    let d = rep.matrix().cols();
    if identity_bypass && target_dim == d {
        return Ok(rep.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut r = Matrix::zeros(d, target_dim);
    for i in 0..d {
        for j in 0..target_dim {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            r.set(i, j, sign * scale);
        }
    }
    let projected = rep.matrix().matmul(&r);
    Representation::new(
        rep.kind(),
        projected,
        rep.row_ids().to_vec(),
        rep.checkpoints().to_vec(),
        rep.lr_scaled(),
        Some(seed),
    )
}
