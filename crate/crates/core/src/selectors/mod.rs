//! The selection algorithms: random baseline, Hard-to-Learn, S2L,
//! Prototypicality, SemDedup, LESS, and Self-Influence, plus the
//! label-matching constraint.
//!
//! Every selector returns exactly `budget.count()` instance ids, sorted
//! ascending, and is deterministic for fixed inputs, config, and seed. All
//! score ties break toward the lowest instance id so that overlap analyses
//! across runs are reproducible.

pub mod kmeans;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Budget, Dataset, RepKind, Representation, Selection, SelectionRepKind};
use crate::error::{Error, Result};
use crate::matrix::{cosine, norm_sq};
use crate::refmodel::CheckpointTrace;
use kmeans::{auto_k, kmeans};

/// Stream separator so that a selector's sampling draws do not reuse the
/// k-means seeding stream for the same seed value.
const SAMPLING_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Mean,
    Max,
}

/// Shared selector knobs. Ties always break toward the lowest instance id;
/// this is a fixed rule, not a setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Number of k-means clusters; `None` means ⌈√N⌉.
    pub k_clusters: Option<usize>,
    /// Cosine-similarity threshold above which a within-cluster pair counts
    /// as a duplicate.
    pub dedup_threshold: f64,
    pub seed: u64,
    /// How LESS aggregates per-validation-instance similarities.
    pub relevance_aggregation: Aggregation,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            k_clusters: None,
            dedup_threshold: 0.99,
            seed: 0,
            relevance_aggregation: Aggregation::Mean,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dedup_threshold > 0.0 && self.dedup_threshold <= 1.0) {
            return Err(Error::validation(format!(
                "dedup_threshold must lie in (0, 1], got {}",
                self.dedup_threshold
            )));
        }
        Ok(())
    }

    fn k(&self, n: usize) -> usize {
        self.k_clusters.unwrap_or_else(|| auto_k(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreDirection {
    SelectLowest,
    SelectHighest,
}

/// Per-instance scores aligned with the dataset rows, plus the direction in
/// which "better" points.
#[derive(Debug, Clone)]
pub struct ScoreVector {
    pub scores: Vec<f64>,
    pub direction: ScoreDirection,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, direction: ScoreDirection) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::validation(format!("non-finite score {bad}")));
        }
        Ok(ScoreVector { scores, direction })
    }
}

/// Ranks rows by score (direction-aware), breaking ties toward the lowest id,
/// and returns the top `b` ids sorted ascending.
fn top_ids_by_score(ids: &[u64], scores: &ScoreVector, b: usize) -> Vec<u64> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &c| {
        let cmp = match scores.direction {
            ScoreDirection::SelectLowest => scores.scores[a].total_cmp(&scores.scores[c]),
            ScoreDirection::SelectHighest => scores.scores[c].total_cmp(&scores.scores[a]),
        };
        cmp.then_with(|| ids[a].cmp(&ids[c]))
    });
    let mut out: Vec<u64> = order[..b].iter().map(|&r| ids[r]).collect();
    out.sort_unstable();
    out
}

fn score_selection(
    method: &str,
    rep_kind: SelectionRepKind,
    ids: &[u64],
    scores: &ScoreVector,
    budget: Budget,
    seed: u64,
) -> Result<Selection> {
    if scores.scores.len() != ids.len() {
        return Err(Error::validation(format!(
            "{} scores for {} instances",
            scores.scores.len(),
            ids.len()
        )));
    }
    if budget.count() > ids.len() {
        return Err(Error::validation(format!(
            "budget {} exceeds dataset size {}",
            budget.count(),
            ids.len()
        )));
    }
    let selected = top_ids_by_score(ids, scores, budget.count());
    Selection::new(method, rep_kind, budget, selected, seed, false)
}

// ── random baseline ─────────────────────────────────────────────────────────

/// Uniform sample without replacement.
pub fn random_select(dataset: &Dataset, budget: Budget, seed: u64) -> Result<Selection> {
    let n = dataset.len();
    if budget.count() > n {
        return Err(Error::validation(format!(
            "budget {} exceeds dataset size {n}",
            budget.count()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = rand::seq::index::sample(&mut rng, n, budget.count());
    let mut ids: Vec<u64> = rows.iter().map(|r| dataset.id(r)).collect();
    ids.sort_unstable();
    Selection::new("random", SelectionRepKind::None, budget, ids, seed, false)
}

// ── hard-to-learn ───────────────────────────────────────────────────────────

/// Mean correct-class probability across epochs; low means hard.
pub fn hard_to_learn_scores(trace: &CheckpointTrace) -> ScoreVector {
    let t = trace.epochs() as f64;
    let scores = trace
        .prob_trajectory()
        .row_iter()
        .map(|row| row.iter().sum::<f64>() / t)
        .collect();
    ScoreVector {
        scores,
        direction: ScoreDirection::SelectLowest,
    }
}

pub fn hard_to_learn(
    trace: &CheckpointTrace,
    dataset: &Dataset,
    budget: Budget,
) -> Result<Selection> {
    if trace.row_ids() != dataset.ids() {
        return Err(Error::validation(
            "trace row ids do not match the dataset",
        ));
    }
    let scores = hard_to_learn_scores(trace);
    score_selection(
        "hard_to_learn",
        SelectionRepKind::DynamicsProb,
        dataset.ids(),
        &scores,
        budget,
        0,
    )
}

// ── S2L ─────────────────────────────────────────────────────────────────────

/// Cluster the representation rows, then repeatedly draw one instance
/// uniformly without replacement from each non-empty cluster, visiting
/// clusters in ascending size order, until the budget is filled.
pub fn s2l(rep: &Representation, budget: Budget, cfg: &SelectorConfig) -> Result<Selection> {
    cfg.validate()?;
    let n = rep.matrix().rows();
    if budget.count() > n {
        return Err(Error::validation(format!(
            "budget {} exceeds dataset size {n}",
            budget.count()
        )));
    }
    let k = cfg.k(n);
    let km = kmeans(rep.matrix(), k, cfg.seed)?;
    let mut clusters = km.members();
    clusters.retain(|c| !c.is_empty());
    // Ascending size; equal sizes keep their cluster-index order.
    clusters.sort_by_key(|c| c.len());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SAMPLING_STREAM);
    let mut selected_rows = Vec::with_capacity(budget.count());
    while selected_rows.len() < budget.count() {
        for members in clusters.iter_mut() {
            if selected_rows.len() == budget.count() {
                break;
            }
            if members.is_empty() {
                continue;
            }
            let pick = rand::Rng::gen_range(&mut rng, 0..members.len());
            selected_rows.push(members.swap_remove(pick));
        }
    }

    let mut ids: Vec<u64> = selected_rows.iter().map(|&r| rep.row_ids()[r]).collect();
    ids.sort_unstable();
    Selection::new(
        "s2l",
        SelectionRepKind::from(rep.kind()),
        budget,
        ids,
        cfg.seed,
        false,
    )
}

// ── prototypicality ─────────────────────────────────────────────────────────

/// Distance of each instance to its own k-means centroid; large means less
/// prototypical, i.e. more difficult.
pub fn prototypicality_scores(
    rep: &Representation,
    cfg: &SelectorConfig,
) -> Result<ScoreVector> {
    cfg.validate()?;
    let km = kmeans(rep.matrix(), cfg.k(rep.matrix().rows()), cfg.seed)?;
    ScoreVector::new(km.distances(rep.matrix()), ScoreDirection::SelectHighest)
}

pub fn prototypicality(
    rep: &Representation,
    budget: Budget,
    cfg: &SelectorConfig,
) -> Result<Selection> {
    let scores = prototypicality_scores(rep, cfg)?;
    score_selection(
        "prototypicality",
        SelectionRepKind::from(rep.kind()),
        rep.row_ids(),
        &scores,
        budget,
        cfg.seed,
    )
}

// ── SemDedup ────────────────────────────────────────────────────────────────

/// Within-cluster near-duplicate removal followed by a prototypicality-style
/// ranking of the survivors.
///
/// Pairs at or above the cosine threshold are scanned in descending
/// similarity; each scan drops the member closer to its centroid (on a tie,
/// the higher id), provided both are still alive. Survivors are ranked by
/// distance to centroid, descending; if fewer than the budget survive,
/// dropped instances are backfilled in the same order.
pub fn semdedup(rep: &Representation, budget: Budget, cfg: &SelectorConfig) -> Result<Selection> {
    cfg.validate()?;
    let m = rep.matrix();
    let ids = rep.row_ids();
    let n = m.rows();
    if budget.count() > n {
        return Err(Error::validation(format!(
            "budget {} exceeds dataset size {n}",
            budget.count()
        )));
    }
    let km = kmeans(m, cfg.k(n), cfg.seed)?;
    let dist = km.distances(m);

    // (similarity, row_i, row_j) for marked pairs, cluster by cluster.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for members in km.members() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let sim = match cosine(m.row(i), m.row(j)) {
                    Some(c) => c,
                    None => {
                        log::warn!(
                            "semdedup: zero-norm representation row (id {} or {}), cosine treated as 0",
                            ids[i],
                            ids[j]
                        );
                        0.0
                    }
                };
                if sim >= cfg.dedup_threshold {
                    pairs.push((sim, i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| ids[a.1].cmp(&ids[b.1]))
            .then_with(|| ids[a.2].cmp(&ids[b.2]))
    });

    let mut dropped = vec![false; n];
    for &(_, i, j) in &pairs {
        if dropped[i] || dropped[j] {
            continue;
        }
        let drop_row = if dist[i] < dist[j] {
            i
        } else if dist[j] < dist[i] {
            j
        } else if ids[i] > ids[j] {
            i
        } else {
            j
        };
        dropped[drop_row] = true;
    }

    let rank = |rows: Vec<usize>| -> Vec<usize> {
        let mut rows = rows;
        rows.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then_with(|| ids[a].cmp(&ids[b])));
        rows
    };
    let survivors = rank((0..n).filter(|&i| !dropped[i]).collect());
    let casualties = rank((0..n).filter(|&i| dropped[i]).collect());

    let mut selected_rows: Vec<usize> = survivors.into_iter().take(budget.count()).collect();
    if selected_rows.len() < budget.count() {
        let missing = budget.count() - selected_rows.len();
        selected_rows.extend(casualties.into_iter().take(missing));
    }

    let mut out: Vec<u64> = selected_rows.iter().map(|&r| ids[r]).collect();
    out.sort_unstable();
    Selection::new(
        "semdedup",
        SelectionRepKind::from(rep.kind()),
        budget,
        out,
        cfg.seed,
        false,
    )
}

// ── LESS ────────────────────────────────────────────────────────────────────

fn check_rep_compat(train: &Representation, val: &Representation) -> Result<()> {
    if train.kind() != val.kind() {
        return Err(Error::validation(format!(
            "representation kind mismatch between train ({}) and val ({})",
            train.kind(),
            val.kind()
        )));
    }
    if train.checkpoints() != val.checkpoints() {
        return Err(Error::validation(
            "checkpoint mismatch between train and val representations",
        ));
    }
    if train.lr_scaled() != val.lr_scaled() {
        return Err(Error::validation(
            "lr_scale mismatch between train and val representations",
        ));
    }
    if train.matrix().cols() != val.matrix().cols() {
        return Err(Error::validation(format!(
            "column mismatch between train ({}) and val ({}) representations",
            train.matrix().cols(),
            val.matrix().cols()
        )));
    }
    if train.kind() == RepKind::Gradients && !train.lr_scaled() {
        return Err(Error::validation(
            "gradient representations for relevance scoring must be built with lr_scale",
        ));
    }
    Ok(())
}

/// Relevance of each training instance: aggregated cosine similarity between
/// its representation row and every validation row.
pub fn less_scores(
    train_rep: &Representation,
    val_rep: &Representation,
    cfg: &SelectorConfig,
) -> Result<ScoreVector> {
    check_rep_compat(train_rep, val_rep)?;
    if val_rep.matrix().rows() == 0 {
        return Err(Error::validation("validation representation is empty"));
    }
    let scores = train_rep
        .matrix()
        .row_iter()
        .map(|row| {
            let sims = val_rep
                .matrix()
                .row_iter()
                .map(|vrow| cosine(row, vrow).unwrap_or(0.0));
            match cfg.relevance_aggregation {
                Aggregation::Mean => {
                    sims.sum::<f64>() / val_rep.matrix().rows() as f64
                }
                Aggregation::Max => sims.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    ScoreVector::new(scores, ScoreDirection::SelectHighest)
}

pub fn less(
    train_rep: &Representation,
    val_rep: &Representation,
    budget: Budget,
    cfg: &SelectorConfig,
) -> Result<Selection> {
    cfg.validate()?;
    let scores = less_scores(train_rep, val_rep, cfg)?;
    score_selection(
        "less",
        SelectionRepKind::from(train_rep.kind()),
        train_rep.row_ids(),
        &scores,
        budget,
        cfg.seed,
    )
}

// ── self-influence ──────────────────────────────────────────────────────────

/// Squared row norm of the √η-scaled gradient representation, which equals
/// `Σ_t η_t‖g^{(t)}‖²`.
pub fn self_influence_scores(rep: &Representation) -> Result<ScoreVector> {
    if rep.kind() != RepKind::Gradients || !rep.lr_scaled() {
        return Err(Error::validation(
            "self-influence requires a gradient representation built with lr_scale",
        ));
    }
    ScoreVector::new(
        rep.matrix().row_iter().map(norm_sq).collect(),
        ScoreDirection::SelectHighest,
    )
}

pub fn self_influence(rep: &Representation, budget: Budget) -> Result<Selection> {
    let scores = self_influence_scores(rep)?;
    score_selection(
        "self_influence",
        SelectionRepKind::from(rep.kind()),
        rep.row_ids(),
        &scores,
        budget,
        0,
    )
}

// ── label matching ──────────────────────────────────────────────────────────

/// Per-label quotas `q_c = round(B·N_c/N)` via the largest-remainder method,
/// then a top-`q_c` cut within each label by score. Quotas that exceed a
/// label's population are clamped and the remainder reassigned.
pub fn apply_label_matching(
    scores: &ScoreVector,
    dataset: &Dataset,
    budget: Budget,
    method: &str,
    rep_kind: SelectionRepKind,
    seed: u64,
) -> Result<Selection> {
    let n = dataset.len();
    if scores.scores.len() != n {
        return Err(Error::validation(format!(
            "{} scores for {n} instances",
            scores.scores.len()
        )));
    }
    let b = budget.count();
    if b > n {
        return Err(Error::validation(format!(
            "budget {b} exceeds dataset size {n}"
        )));
    }

    let mut labels: Vec<crate::data::Label> = dataset.labels().to_vec();
    labels.sort_unstable();
    labels.dedup();

    let counts: Vec<usize> = labels
        .iter()
        .map(|l| dataset.labels().iter().filter(|x| *x == l).count())
        .collect();

    // Largest-remainder apportionment of B across labels.
    let exact: Vec<f64> = counts
        .iter()
        .map(|&c| b as f64 * c as f64 / n as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &c| {
        let ra = exact[a] - exact[a].floor();
        let rc = exact[c] - exact[c].floor();
        rc.total_cmp(&ra).then_with(|| a.cmp(&c))
    });
    for i in 0..b.saturating_sub(assigned) {
        quotas[order[i % labels.len()]] += 1;
    }

    // Clamp quotas to label populations, pushing the excess to labels that
    // still have capacity.
    loop {
        let mut excess = 0usize;
        for (q, &c) in quotas.iter_mut().zip(&counts) {
            if *q > c {
                excess += *q - c;
                *q = c;
            }
        }
        if excess == 0 {
            break;
        }
        log::warn!("label matching: quota exceeded a label population; reassigning {excess}");
        for (q, &c) in quotas.iter_mut().zip(&counts) {
            let room = c - *q;
            let add = room.min(excess);
            *q += add;
            excess -= add;
            if excess == 0 {
                break;
            }
        }
    }

    let mut selected = Vec::with_capacity(b);
    for (label, &quota) in labels.iter().zip(&quotas) {
        let rows: Vec<usize> = (0..n).filter(|&i| dataset.label(i) == *label).collect();
        let ids: Vec<u64> = rows.iter().map(|&r| dataset.id(r)).collect();
        let sub_scores = ScoreVector {
            scores: rows.iter().map(|&r| scores.scores[r]).collect(),
            direction: scores.direction,
        };
        selected.extend(top_ids_by_score(&ids, &sub_scores, quota));
    }
    selected.sort_unstable();
    Selection::new(method, rep_kind, budget, selected, seed, true)
}
