//! Synthetic 2D Gaussian-mixture data for fully reproducible end-to-end runs.
//!
//! Sampling is a pure function of `(spec, n, seed)`: component assignment by
//! cumulative weight, then a Gaussian draw through the Cholesky factor of the
//! component covariance. The PRNG algorithm is named in the spec file
//! (`"rng": "chacha8"`) so regenerated datasets are reproducible across
//! machines and releases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, ValidationSet};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The only sampling algorithm this crate emits or accepts.
pub const RNG_ALGORITHM: &str = "chacha8";

/// Default two-class mixture: two components per class around an overlapping
/// decision region. The mixture parameters are a documented stand-in (they are
/// not prescribed anywhere) and can be overridden via a spec file.
pub const DEFAULT_GMM_SPEC: &str = include_str!("../assets/default_gmm.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmComponent {
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub label: i64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmmSpec {
    #[serde(default = "default_rng_name")]
    pub rng: String,
    pub components: Vec<GmmComponent>,
}

fn default_rng_name() -> String {
    RNG_ALGORITHM.to_string()
}

/// Lower-triangular Cholesky factor of a symmetric PSD 2×2 matrix. Degenerate
/// (singular) covariances are allowed; indefinite ones are not.
fn cholesky_2x2(cov: &[[f64; 2]; 2]) -> Result<[[f64; 2]; 2]> {
    let (a, b, b2, c) = (cov[0][0], cov[0][1], cov[1][0], cov[1][1]);
    let scale = a.abs().max(c.abs()).max(b.abs()).max(1.0);
    let tol = 1e-12 * scale;
    if (b - b2).abs() > tol {
        return Err(Error::validation(format!(
            "covariance must be symmetric, got off-diagonal {b} vs {b2}"
        )));
    }
    if a < -tol || c < -tol || a * c - b * b < -tol * scale {
        return Err(Error::validation(format!(
            "covariance [[{a}, {b}], [{b2}, {c}]] is not positive semidefinite"
        )));
    }
    let l11 = a.max(0.0).sqrt();
    let l21 = if l11 > 0.0 { b / l11 } else { 0.0 };
    if l11 == 0.0 && b.abs() > tol {
        return Err(Error::validation(
            "covariance has zero variance but nonzero correlation",
        ));
    }
    let l22 = (c - l21 * l21).max(0.0).sqrt();
    Ok([[l11, 0.0], [l21, l22]])
}

struct PreparedComponent {
    mean: [f64; 2],
    chol: [[f64; 2]; 2],
    label: Label,
    cum_weight: f64,
}

impl GmmSpec {
    pub fn from_json(json: &str) -> Result<GmmSpec> {
        let spec: GmmSpec = serde_json::from_str(json)
            .map_err(|e| Error::validation(format!("invalid GMM spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn default_spec() -> GmmSpec {
        GmmSpec::from_json(DEFAULT_GMM_SPEC).expect("embedded default spec is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.rng != RNG_ALGORITHM {
            return Err(Error::validation(format!(
                "unknown rng algorithm {:?}, expected {RNG_ALGORITHM:?}",
                self.rng
            )));
        }
        if self.components.is_empty() {
            return Err(Error::validation("GMM spec needs ≥ 1 component"));
        }
        let mut total = 0.0;
        for (i, comp) in self.components.iter().enumerate() {
            if Label::from_int(comp.label).is_none() {
                return Err(Error::validation(format!(
                    "component {i}: label must be -1 or 1, got {}",
                    comp.label
                )));
            }
            if !(comp.weight > 0.0) {
                return Err(Error::validation(format!(
                    "component {i}: weight must be positive, got {}",
                    comp.weight
                )));
            }
            cholesky_2x2(&comp.covariance)
                .map_err(|e| Error::validation(format!("component {i}: {e}")))?;
            total += comp.weight;
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!(
                "component weights must sum to 1, got {total}"
            )));
        }
        Ok(())
    }

    /// True when the mixture covers both classes (required for the
    /// classification pipeline, not for raw sampling).
    pub fn covers_both_labels(&self) -> bool {
        let has = |v: i64| self.components.iter().any(|c| c.label == v);
        has(-1) && has(1)
    }

    fn prepare(&self) -> Result<Vec<PreparedComponent>> {
        self.validate()?;
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut cum = 0.0;
        self.components
            .iter()
            .map(|c| {
                cum += c.weight / total;
                Ok(PreparedComponent {
                    mean: c.mean,
                    chol: cholesky_2x2(&c.covariance)?,
                    label: Label::from_int(c.label).expect("validated"),
                    cum_weight: cum,
                })
            })
            .collect()
    }
}

fn sample_instance(comps: &[PreparedComponent], rng: &mut ChaCha8Rng) -> (Vec<f64>, Label) {
    let u: f64 = rng.gen();
    let comp = comps
        .iter()
        .find(|c| u < c.cum_weight)
        .unwrap_or_else(|| comps.last().expect("≥ 1 component"));
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let x = comp.mean[0] + comp.chol[0][0] * z1;
    let y = comp.mean[1] + comp.chol[1][0] * z1 + comp.chol[1][1] * z2;
    (vec![x, y], comp.label)
}

/// Samples `n` labeled points; ids are `0..n`.
pub fn generate(spec: &GmmSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::validation("dataset must contain ≥ 1 instance"));
    }
    let comps = spec.prepare()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, label) = sample_instance(&comps, &mut rng);
        rows.push(x);
        labels.push(label);
    }
    Dataset::new((0..n as u64).collect(), Matrix::from_rows(&rows), labels)
}

/// Samples a train/validation split from one stream: train ids are
/// `0..n_train`, validation ids continue at `n_train..n_train+n_val`.
pub fn generate_split(
    spec: &GmmSpec,
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<(Dataset, ValidationSet)> {
    if n_train == 0 || n_val == 0 {
        return Err(Error::validation("split sizes must be ≥ 1"));
    }
    let comps = spec.prepare()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut draw = |count: usize, first_id: u64| {
        let mut rows = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for _ in 0..count {
            let (x, label) = sample_instance(&comps, &mut rng);
            rows.push(x);
            labels.push(label);
        }
        Dataset::new(
            (first_id..first_id + count as u64).collect(),
            Matrix::from_rows(&rows),
            labels,
        )
    };

    let train = draw(n_train, 0)?;
    let val = draw(n_val, n_train as u64)?;
    let val = ValidationSet::new(val, &train)?;
    Ok((train, val))
}
