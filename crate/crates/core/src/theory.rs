//! Closed-form pairwise distances, discriminative power, and the peak/root
//! analysis of the gradient curve.
//!
//! With the signed margin `z = y·wᵀh` (bias folded into `w`):
//!
//! - `D_h = ‖h_i − h_j‖²`
//! - `D_ℓ = (log((1+e^(−z_i))/(1+e^(−z_j))))²`
//! - `D_g = ‖h_i‖²/(1+e^(z_i))² + ‖h_j‖²/(1+e^(z_j))²
//!          − 2·y_i·y_j·h_iᵀh_j/((1+e^(z_i))(1+e^(z_j)))`
//!
//! Discriminative power is the spectral norm of a representation's Jacobian
//! w.r.t. the hidden state: `C_ℓ = ‖w‖/(1+e^z)` exactly, and
//! `C_g ≤ 1/(1+e^z) + e^z/(1+e^z)²·‖h‖‖w‖`. With `α = ‖w‖‖h‖`, the bound is
//! monotone decreasing in `z` for `α` below the positive root of
//! `−x(1−e^x) = 1+e^x` (≈ 1.544) and otherwise peaks at
//! `z* = log((α−1)/(α+1))`, just on the misclassified side of the boundary.
//!
//! Everything here runs in f64 with stable log/exp forms.

use serde::Serialize;

use crate::data::{Label, RepKind};
use crate::error::{Error, Result};
use crate::matrix::{dot, norm, norm_sq, Matrix};
use crate::refmodel::{sigmoid, softplus};

/// A pair of (bias-extended) instances together with the classifier weights;
/// margins are recomputed at construction, never stored stale.
#[derive(Debug, Clone)]
pub struct InstancePair {
    h_i: Vec<f64>,
    h_j: Vec<f64>,
    y_i: Label,
    y_j: Label,
    w: Vec<f64>,
    z_i: f64,
    z_j: f64,
}

impl InstancePair {
    pub fn new(
        h_i: Vec<f64>,
        y_i: Label,
        h_j: Vec<f64>,
        y_j: Label,
        w: Vec<f64>,
    ) -> Result<Self> {
        if h_i.len() != w.len() || h_j.len() != w.len() {
            return Err(Error::validation(format!(
                "dimension mismatch: h_i {} / h_j {} / w {}",
                h_i.len(),
                h_j.len(),
                w.len()
            )));
        }
        if h_i.iter().chain(&h_j).chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::validation("non-finite pair input"));
        }
        let z_i = y_i.sign() * dot(&w, &h_i);
        let z_j = y_j.sign() * dot(&w, &h_j);
        Ok(InstancePair {
            h_i,
            h_j,
            y_i,
            y_j,
            w,
            z_i,
            z_j,
        })
    }

    pub fn h_i(&self) -> &[f64] {
        &self.h_i
    }

    pub fn h_j(&self) -> &[f64] {
        &self.h_j
    }

    pub fn y_i(&self) -> Label {
        self.y_i
    }

    pub fn y_j(&self) -> Label {
        self.y_j
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn z_i(&self) -> f64 {
        self.z_i
    }

    pub fn z_j(&self) -> f64 {
        self.z_j
    }

    /// `ℓ_i = ln(1+e^(−z_i))`.
    pub fn loss_i(&self) -> f64 {
        softplus(-self.z_i)
    }

    pub fn loss_j(&self) -> f64 {
        softplus(-self.z_j)
    }

    /// `g_i = −y_i·h_i/(1+e^(z_i))`.
    pub fn gradient_i(&self) -> Vec<f64> {
        let c = -self.y_i.sign() * sigmoid(-self.z_i);
        self.h_i.iter().map(|&v| c * v).collect()
    }

    pub fn gradient_j(&self) -> Vec<f64> {
        let c = -self.y_j.sign() * sigmoid(-self.z_j);
        self.h_j.iter().map(|&v| c * v).collect()
    }
}

/// Squared Euclidean distance of the hidden states.
pub fn dist_hidden(pair: &InstancePair) -> f64 {
    crate::matrix::sq_dist(&pair.h_i, &pair.h_j)
}

/// Squared loss distance; collapses whenever `z_i = z_j`, direction is lost.
pub fn dist_loss(pair: &InstancePair) -> f64 {
    let d = softplus(-pair.z_i) - softplus(-pair.z_j);
    d * d
}

/// Squared gradient distance in the expanded, overflow-safe form.
pub fn dist_gradient(pair: &InstancePair) -> f64 {
    let s_i = sigmoid(-pair.z_i);
    let s_j = sigmoid(-pair.z_j);
    let cross = pair.y_i.sign() * pair.y_j.sign() * dot(&pair.h_i, &pair.h_j);
    norm_sq(&pair.h_i) * s_i * s_i + norm_sq(&pair.h_j) * s_j * s_j
        - 2.0 * cross * s_i * s_j
}

/// `C_ℓ = ‖w‖/(1+e^z) = (1 − p)·‖w‖`.
pub fn disc_power_loss(z: f64, w_norm: f64) -> f64 {
    w_norm * sigmoid(-z)
}

/// Upper bound on `C_g`: `1/(1+e^z) + e^z/(1+e^z)²·‖h‖‖w‖`.
pub fn disc_power_grad_bound(z: f64, h_norm: f64, w_norm: f64) -> f64 {
    sigmoid(-z) + sigmoid(z) * sigmoid(-z) * h_norm * w_norm
}

/// Exact Jacobian of the classifier gradient w.r.t. the hidden state:
/// `∂g/∂h = −y/(1+e^z)·I + e^z/(1+e^z)²·h·wᵀ` (a d×d matrix). Its spectral
/// norm is the quantity bounded by [`disc_power_grad_bound`].
pub fn gradient_jacobian(h: &[f64], y: Label, w: &[f64]) -> Result<Matrix> {
    if h.len() != w.len() {
        return Err(Error::validation("dimension mismatch between h and w"));
    }
    let z = y.sign() * dot(w, h);
    let s = sigmoid(-z);
    let rank1 = sigmoid(z) * s;
    let d = h.len();
    let mut m = Matrix::zeros(d, d);
    for r in 0..d {
        for c in 0..d {
            let mut v = rank1 * h[r] * w[c];
            if r == c {
                v -= y.sign() * s;
            }
            m.set(r, c, v);
        }
    }
    Ok(m)
}

/// Jacobian of the pairwise distance `D_r` w.r.t. `h_i` via the factored form
/// `2·J_{h_i}(r_i)ᵀ·(r_i − r_j)`.
pub fn pairwise_distance_jacobian(pair: &InstancePair, rep_kind: RepKind) -> Result<Vec<f64>> {
    match rep_kind {
        RepKind::HiddenStates => Ok(pair
            .h_i
            .iter()
            .zip(&pair.h_j)
            .map(|(a, b)| 2.0 * (a - b))
            .collect()),
        RepKind::DynamicsLoss => {
            // J(ℓ_i) = −y_i·w/(1+e^{z_i}); r_i − r_j = ℓ_i − ℓ_j.
            let coef =
                2.0 * (pair.loss_i() - pair.loss_j()) * (-pair.y_i.sign() * sigmoid(-pair.z_i));
            Ok(pair.w.iter().map(|&wk| coef * wk).collect())
        }
        RepKind::Gradients => {
            let jac = gradient_jacobian(&pair.h_i, pair.y_i, &pair.w)?;
            let diff: Vec<f64> = pair
                .gradient_i()
                .iter()
                .zip(pair.gradient_j())
                .map(|(a, b)| a - b)
                .collect();
            Ok(jac.matvec_t(&diff).iter().map(|v| 2.0 * v).collect())
        }
        RepKind::DynamicsProb => Err(Error::validation(
            "unsupported rep_kind dynamics_prob for pairwise distances",
        )),
    }
}

/// `f(x) = −x(1−e^x) − (1+e^x)`; its positive root separates the monotone and
/// peaked regimes of the gradient bound.
fn threshold_fn(x: f64) -> f64 {
    -x * (1.0 - x.exp()) - (1.0 + x.exp())
}

/// Positive root of `−x(1−e^x) = 1+e^x`, bisected on [1, 2].
pub fn alpha_threshold() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    debug_assert!(threshold_fn(lo) < 0.0 && threshold_fn(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if threshold_fn(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Interior maximizer `z* = log((α−1)/(α+1))` of the gradient bound, present
/// only above the threshold; below it the bound decreases monotonically on
/// `[−α, α]`.
pub fn cg_peak_location(alpha: f64) -> Result<Option<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::validation(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if alpha > alpha_threshold() {
        Ok(Some(((alpha - 1.0) / (alpha + 1.0)).ln()))
    } else {
        Ok(None)
    }
}

/// Tabulated discriminative-power curves for one `α`.
#[derive(Debug, Clone, Serialize)]
pub struct CurveTable {
    pub alpha: f64,
    pub z_grid: Vec<f64>,
    pub c_loss: Vec<f64>,
    pub c_grad: Vec<f64>,
    pub normalized: bool,
}

fn min_max_normalize(values: &mut [f64]) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.0 };
    }
}

/// Tabulates `C_ℓ` and the `C_g` bound over `z ∈ [−α, α]` per alpha;
/// optionally min-max normalizes each curve to [0, 1].
pub fn emit_curves(
    alphas: &[f64],
    grid_points: usize,
    w_norm: f64,
    normalized: bool,
) -> Result<Vec<CurveTable>> {
    if grid_points < 2 {
        return Err(Error::validation("grid needs ≥ 2 points"));
    }
    if !(w_norm > 0.0) {
        return Err(Error::validation("w_norm must be positive"));
    }
    alphas
        .iter()
        .map(|&alpha| {
            if !(alpha > 0.0) {
                return Err(Error::validation(format!(
                    "alpha must be positive, got {alpha}"
                )));
            }
            let h_norm = alpha / w_norm;
            let step = 2.0 * alpha / (grid_points - 1) as f64;
            let z_grid: Vec<f64> = (0..grid_points)
                .map(|k| (-alpha + k as f64 * step).clamp(-alpha, alpha))
                .collect();
            let mut c_loss: Vec<f64> =
                z_grid.iter().map(|&z| disc_power_loss(z, w_norm)).collect();
            let mut c_grad: Vec<f64> = z_grid
                .iter()
                .map(|&z| disc_power_grad_bound(z, h_norm, w_norm))
                .collect();
            if normalized {
                min_max_normalize(&mut c_loss);
                min_max_normalize(&mut c_grad);
            }
            Ok(CurveTable {
                alpha,
                z_grid,
                c_loss,
                c_grad,
                normalized,
            })
        })
        .collect()
}

/// Plot-ready CSV with columns `alpha,z,c_loss,c_grad,normalized`.
pub fn curves_to_csv(tables: &[CurveTable]) -> String {
    let mut out = String::from("alpha,z,c_loss,c_grad,normalized\n");
    for t in tables {
        for ((z, cl), cg) in t.z_grid.iter().zip(&t.c_loss).zip(&t.c_grad) {
            out.push_str(&format!("{},{},{},{},{}\n", t.alpha, z, cl, cg, t.normalized));
        }
    }
    out
}

/// Largest singular value.
///
/// Vectors (single row/column) and two-dimensional Gram matrices are solved in
/// closed form; everything else uses power iteration on `MᵀM` with a
/// deterministic seeded start.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    if m.rows() == 1 || m.cols() == 1 {
        return norm(m.data());
    }
    if m.cols() == 2 || m.rows() == 2 {
        // 2×2 Gram matrix eigenvalue, exact.
        let (a, b, c) = if m.cols() == 2 {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for row in m.row_iter() {
                a += row[0] * row[0];
                b += row[0] * row[1];
                c += row[1] * row[1];
            }
            (a, b, c)
        } else {
            let (r0, r1) = (m.row(0), m.row(1));
            (norm_sq(r0), dot(r0, r1), norm_sq(r1))
        };
        let mean = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return (mean + disc).max(0.0).sqrt();
    }

    if m.data().iter().all(|&v| v == 0.0) {
        return 0.0;
    }

    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x57EC_7121);
    let mut v: Vec<f64> = (0..m.cols()).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }

    let mut sigma = 0.0f64;
    for _ in 0..100_000 {
        let u = m.matvec(&v);
        let s = norm(&u);
        if s == 0.0 {
            // v fell in the null space; perturb deterministically.
            for x in &mut v {
                *x += rng.gen::<f64>() - 0.5;
            }
            let nv = norm(&v);
            for x in &mut v {
                *x /= nv;
            }
            continue;
        }
        let t = m.matvec_t(&u);
        let nt = norm(&t);
        if nt == 0.0 {
            return s;
        }
        for (vi, ti) in v.iter_mut().zip(&t) {
            *vi = ti / nt;
        }
        if (s - sigma).abs() <= 1e-13 * s.max(f64::MIN_POSITIVE) {
            return s;
        }
        sigma = s;
    }
    sigma
}
