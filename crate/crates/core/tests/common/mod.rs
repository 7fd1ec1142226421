//! Shared oracle helpers for the verification suites. Everything here is
//! independent of the library's computation paths: finite differences for
//! derivatives and a one-sided Jacobi SVD for spectral norms.

// Each integration test binary compiles its own copy; not all of them use
// every helper.
#![allow(dead_code)]

use prunekit::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs()).max(1e-300);
    (a - b).abs() / denom
}

/// Central-difference gradient of a scalar function.
pub fn central_diff_grad<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Central-difference Jacobian of a vector function, laid out with one output
/// per row (rows = output dim, cols = input dim).
pub fn central_diff_jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    f: F,
    x: &[f64],
    step: f64,
) -> Matrix {
    let out_dim = f(x).len();
    let mut jac = Matrix::zeros(out_dim, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + step;
        let plus = f(&probe);
        probe[j] = x[j] - step;
        let minus = f(&probe);
        probe[j] = x[j];
        for i in 0..out_dim {
            jac.set(i, j, (plus[i] - minus[i]) / (2.0 * step));
        }
    }
    jac
}

/// Largest singular value via one-sided Jacobi rotations: orthogonalize the
/// columns of the (tall) matrix; the singular values are the column norms.
pub fn jacobi_svd_max(m: &Matrix) -> f64 {
    // Work on a column-major copy of the tall orientation.
    let (rows, cols) = if m.rows() >= m.cols() {
        (m.rows(), m.cols())
    } else {
        (m.cols(), m.rows())
    };
    let mut a = vec![vec![0.0f64; rows]; cols];
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if m.rows() >= m.cols() {
                a[j][i] = m.get(i, j);
            } else {
                a[i][j] = m.get(i, j);
            }
        }
    }

    let eps = 1e-14;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                for k in 0..rows {
                    app += a[p][k] * a[p][k];
                    aqq += a[q][k] * a[q][k];
                    apq += a[p][k] * a[q][k];
                }
                if apq.abs() <= eps * (app * aqq).sqrt() {
                    continue;
                }
                off = off.max(apq.abs());
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let vp = a[p][k];
                    let vq = a[q][k];
                    a[p][k] = c * vp - s * vq;
                    a[q][k] = s * vp + c * vq;
                }
            }
        }
        if off == 0.0 {
            break;
        }
    }

    a.iter()
        .map(|col| col.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

pub fn randn_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
