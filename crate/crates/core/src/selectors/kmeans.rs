//! Lloyd's algorithm with k-means++ seeding.
//!
//! Fully deterministic for a fixed seed: seeding draws come from a ChaCha8
//! stream, assignment ties go to the lowest centroid index, and empty
//! clusters are re-seeded to the point currently farthest from its centroid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{sq_dist, Matrix};

const MAX_ITERS: usize = 100;
const SHIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Matrix,
    /// Cluster index per data row.
    pub assignments: Vec<usize>,
    pub iterations: usize,
}

impl KMeansResult {
    /// Euclidean distance of each row to its own centroid.
    pub fn distances(&self, data: &Matrix) -> Vec<f64> {
        self.assignments
            .iter()
            .enumerate()
            .map(|(i, &c)| sq_dist(data.row(i), self.centroids.row(c)).sqrt())
            .collect()
    }

    /// Row indices grouped by cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let k = self.centroids.rows();
        let mut out = vec![Vec::new(); k];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn nearest_centroid(row: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.row_iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn kmeanspp_seed(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.gen_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(data.row(i), data.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                cum += w;
                if target < cum {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining mass is zero (duplicate points): fall back to a
            // uniform draw.
            rng.gen_range(0..n)
        };
        chosen.push(next);
        for i in 0..n {
            let d = sq_dist(data.row(i), data.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}

pub fn kmeans(data: &Matrix, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = data.rows();
    if k == 0 {
        return Err(Error::validation("k must be ≥ 1"));
    }
    if k > n {
        return Err(Error::validation(format!(
            "k = {k} exceeds the number of instances {n}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = kmeanspp_seed(data, k, &mut rng);
    let mut centroids = Matrix::zeros(k, data.cols());
    for (c, &row) in seeds.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(data.row(row));
    }

    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for iter in 1..=MAX_ITERS {
        iterations = iter;
        for i in 0..n {
            assignments[i] = nearest_centroid(data.row(i), &centroids).0;
        }

        let mut sums = Matrix::zeros(k, data.cols());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
                *s += v;
            }
        }

        // Re-seed empty clusters to the point farthest from its centroid.
        let mut stolen = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let mut far_i = 0;
            let mut far_d = -1.0;
            for i in 0..n {
                if stolen[i] || counts[assignments[i]] <= 1 {
                    continue;
                }
                let d = sq_dist(data.row(i), centroids.row(assignments[i]));
                if d > far_d {
                    far_d = d;
                    far_i = i;
                }
            }
            stolen[far_i] = true;
            let old = assignments[far_i];
            counts[old] -= 1;
            for (s, &v) in sums.row_mut(old).iter_mut().zip(data.row(far_i)) {
                *s -= v;
            }
            assignments[far_i] = c;
            counts[c] = 1;
            sums.row_mut(c).copy_from_slice(data.row(far_i));
        }

        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for (j, old) in centroids.row_mut(c).iter_mut().enumerate() {
                let new = sums.get(c, j) * inv;
                moved += (new - *old) * (new - *old);
                *old = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < SHIFT_TOL {
            break;
        }
    }

    // Final assignment against the converged centroids.
    for i in 0..n {
        assignments[i] = nearest_centroid(data.row(i), &centroids).0;
    }

    Ok(KMeansResult {
        centroids,
        assignments,
        iterations,
    })
}

/// Default cluster count ⌈√N⌉.
pub fn auto_k(n: usize) -> usize {
    (n as f64).sqrt().ceil() as usize
}
