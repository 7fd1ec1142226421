//! Core domain types: datasets, budgets, representations, and selections.
//!
//! Instance identity is the integer id carried by the dataset file, never the
//! row position, so selections stay meaningful if an external tool reorders
//! the file. All types validate their invariants at construction and are
//! immutable afterwards.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Binary class label, −1 or +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    pub fn from_int(v: i64) -> Option<Label> {
        match v {
            -1 => Some(Label::Neg),
            1 => Some(Label::Pos),
            _ => None,
        }
    }

    pub fn as_int(self) -> i8 {
        match self {
            Label::Neg => -1,
            Label::Pos => 1,
        }
    }

    /// The label as the ±1 factor used in margins and gradients.
    pub fn sign(self) -> f64 {
        f64::from(self.as_int())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_int())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Label::from_int(v)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be -1 or 1, got {v}")))
    }
}

/// A labeled training set. Feature rows are the hidden states `h(x_i)`;
/// the bias column is *not* stored here (theory code folds it in).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<u64>,
    features: Matrix,
    labels: Vec<Label>,
}

impl Dataset {
    pub fn new(ids: Vec<u64>, features: Matrix, labels: Vec<Label>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::validation("dataset must contain ≥ 1 instance"));
        }
        if ids.len() != features.rows() || ids.len() != labels.len() {
            return Err(Error::validation(format!(
                "dataset fields disagree: {} ids, {} feature rows, {} labels",
                ids.len(),
                features.rows(),
                labels.len()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::validation(format!("duplicate instance id {id}")));
            }
        }
        if !features.is_finite() {
            return Err(Error::validation("non-finite feature value"));
        }
        Ok(Dataset {
            ids,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Feature dimensionality `d_h` (without bias).
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> u64 {
        self.ids[row]
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, row: usize) -> Label {
        self.labels[row]
    }

    /// Lookup table id → row position.
    pub fn row_index(&self) -> HashMap<u64, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(row, &id)| (id, row))
            .collect()
    }
}

/// Held-out instances used only for relevance scoring; ids must not collide
/// with the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSet(Dataset);

impl ValidationSet {
    pub fn new(val: Dataset, train: &Dataset) -> Result<Self> {
        let train_ids: HashSet<u64> = train.ids().iter().copied().collect();
        if let Some(&id) = val.ids().iter().find(|id| train_ids.contains(id)) {
            return Err(Error::validation(format!(
                "validation set shares instance id {id} with the training set"
            )));
        }
        Ok(ValidationSet(val))
    }

    pub fn dataset(&self) -> &Dataset {
        &self.0
    }

    pub fn into_dataset(self) -> Dataset {
        self.0
    }
}

/// Data budget: a fraction of the dataset and the resolved instance count
/// `B = round(fraction · N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    fraction: f64,
    resolved_count: usize,
}

impl Budget {
    pub fn from_fraction(fraction: f64, n: usize) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::validation(format!(
                "budget fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let resolved_count = (fraction * n as f64).round() as usize;
        if resolved_count == 0 {
            return Err(Error::validation(format!(
                "budget fraction {fraction} resolves to 0 of {n} instances"
            )));
        }
        let resolved_count = resolved_count.min(n);
        Ok(Budget {
            fraction,
            resolved_count,
        })
    }

    pub fn from_count(count: usize, n: usize) -> Result<Self> {
        if count == 0 || count > n {
            return Err(Error::validation(format!(
                "budget count must lie in 1..={n}, got {count}"
            )));
        }
        Ok(Budget {
            fraction: count as f64 / n as f64,
            resolved_count: count,
        })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn count(&self) -> usize {
        self.resolved_count
    }

    /// Re-checks invariants after deserialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::validation(format!(
                "budget fraction must lie in (0, 1], got {}",
                self.fraction
            )));
        }
        if self.resolved_count == 0 {
            return Err(Error::validation("budget resolved_count must be ≥ 1"));
        }
        Ok(())
    }
}

/// The representation families of the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepKind {
    HiddenStates,
    DynamicsProb,
    DynamicsLoss,
    Gradients,
}

impl RepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RepKind::HiddenStates => "hidden_states",
            RepKind::DynamicsProb => "dynamics_prob",
            RepKind::DynamicsLoss => "dynamics_loss",
            RepKind::Gradients => "gradients",
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An N×d matrix of one representation kind plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    kind: RepKind,
    matrix: Matrix,
    row_ids: Vec<u64>,
    /// Source checkpoint epochs (empty for hidden states).
    checkpoints: Vec<usize>,
    /// Whether per-checkpoint blocks were scaled by √η_t.
    lr_scaled: bool,
    projection_seed: Option<u64>,
}

impl Representation {
    pub fn new(
        kind: RepKind,
        matrix: Matrix,
        row_ids: Vec<u64>,
        checkpoints: Vec<usize>,
        lr_scaled: bool,
        projection_seed: Option<u64>,
    ) -> Result<Self> {
        if row_ids.len() != matrix.rows() {
            return Err(Error::validation(format!(
                "representation has {} rows but {} row ids",
                matrix.rows(),
                row_ids.len()
            )));
        }
        if !matrix.is_finite() {
            return Err(Error::validation(
                "representation contains a non-finite entry",
            ));
        }
        if kind == RepKind::DynamicsProb {
            if let Some(bad) = matrix
                .data()
                .iter()
                .find(|v| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::validation(format!(
                    "dynamics_prob entry {bad} outside [0, 1]"
                )));
            }
        }
        Ok(Representation {
            kind,
            matrix,
            row_ids,
            checkpoints,
            lr_scaled,
            projection_seed,
        })
    }

    pub fn kind(&self) -> RepKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn row_ids(&self) -> &[u64] {
        &self.row_ids
    }

    pub fn checkpoints(&self) -> &[usize] {
        &self.checkpoints
    }

    pub fn lr_scaled(&self) -> bool {
        self.lr_scaled
    }

    pub fn projection_seed(&self) -> Option<u64> {
        self.projection_seed
    }
}

/// Representation recorded in a selection; `None` for selectors that use no
/// representation (the random baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRepKind {
    HiddenStates,
    DynamicsProb,
    DynamicsLoss,
    Gradients,
    None,
}

impl From<RepKind> for SelectionRepKind {
    fn from(k: RepKind) -> Self {
        match k {
            RepKind::HiddenStates => SelectionRepKind::HiddenStates,
            RepKind::DynamicsProb => SelectionRepKind::DynamicsProb,
            RepKind::DynamicsLoss => SelectionRepKind::DynamicsLoss,
            RepKind::Gradients => SelectionRepKind::Gradients,
        }
    }
}

impl fmt::Display for SelectionRepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SelectionRepKind::HiddenStates => "hidden_states",
            SelectionRepKind::DynamicsProb => "dynamics_prob",
            SelectionRepKind::DynamicsLoss => "dynamics_loss",
            SelectionRepKind::Gradients => "gradients",
            SelectionRepKind::None => "none",
        };
        f.write_str(s)
    }
}

/// A budgeted subset of the dataset and the recipe that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub method: String,
    pub representation_kind: SelectionRepKind,
    pub budget: Budget,
    pub selected_ids: Vec<u64>,
    pub seed: u64,
    pub label_matched: bool,
}

impl Selection {
    pub fn new(
        method: impl Into<String>,
        representation_kind: SelectionRepKind,
        budget: Budget,
        selected_ids: Vec<u64>,
        seed: u64,
        label_matched: bool,
    ) -> Result<Self> {
        let sel = Selection {
            method: method.into(),
            representation_kind,
            budget,
            selected_ids,
            seed,
            label_matched,
        };
        sel.validate()?;
        Ok(sel)
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        if self.selected_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(
                "selected_ids must be strictly increasing",
            ));
        }
        if self.selected_ids.len() != self.budget.count() {
            return Err(Error::validation(format!(
                "selected_ids length {} does not match budget resolved_count {}",
                self.selected_ids.len(),
                self.budget.count()
            )));
        }
        Ok(())
    }

    /// Checks that every selected id exists in `dataset`.
    pub fn validate_against(&self, dataset: &Dataset) -> Result<()> {
        let known: HashSet<u64> = dataset.ids().iter().copied().collect();
        if let Some(&id) = self.selected_ids.iter().find(|id| !known.contains(id)) {
            return Err(Error::validation(format!(
                "selected id {id} is not in the dataset"
            )));
        }
        Ok(())
    }

    /// Display label `method__repkind` used in overlap matrices and reports.
    pub fn label(&self) -> String {
        format!("{}__{}", self.method, self.representation_kind)
    }
}
