//! Run configuration: one JSON document drives the whole pipeline.
//!
//! Semantic violations are reported with JSON-pointer paths into the config
//! document so batch users can locate them mechanically.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::RepKind;
use crate::error::{Error, Result};
use crate::selectors::{Aggregation, SelectorConfig};
use crate::synthgen::GmmSpec;

/// Bundled config reproducing the synthetic experiment end to end: 600 GMM
/// points, a 15-epoch logistic-regression reference model, all four
/// representation kinds, and every selector at a 30% budget.
pub const PAPER_SYNTHETIC_CONFIG: &str = include_str!("../assets/paper_synthetic.json");

/// Budget grid used when neither the config nor a selector names budgets.
pub const DEFAULT_BUDGET_GRID: [f64; 5] = [0.05, 0.15, 0.30, 0.50, 0.70];

/// File layout of a run directory. Paths are relative to the `--out` root.
pub mod layout {
    use crate::data::RepKind;

    pub const CONFIG: &str = "config.json";
    pub const DATASET: &str = "dataset.jsonl";
    pub const VALIDATION: &str = "validation.jsonl";
    pub const TRACE_META: &str = "trace.meta.json";
    pub const TRACE_BIN: &str = "trace.bin";
    pub const REPS_DIR: &str = "reps";
    pub const SELECTIONS_DIR: &str = "selections";
    pub const REPORT_DIR: &str = "report";
    pub const OVERLAP_CSV: &str = "overlap_matrix.csv";
    pub const LABEL_DIST_CSV: &str = "label_distribution.csv";
    pub const BOUNDARY_CSV: &str = "boundary_stats.csv";
    pub const MANIFEST: &str = "manifest.json";

    pub fn rep_meta(kind: RepKind) -> String {
        format!("{}/{kind}.meta.json", REPS_DIR)
    }

    pub fn rep_bin(kind: RepKind) -> String {
        format!("{}/{kind}.bin", REPS_DIR)
    }

    /// Validation-set twin of a representation (built for LESS).
    pub fn val_rep_meta(kind: RepKind) -> String {
        format!("{}/val_{kind}.meta.json", REPS_DIR)
    }

    pub fn val_rep_bin(kind: RepKind) -> String {
        format!("{}/val_{kind}.bin", REPS_DIR)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Generate {
        /// Mixture spec; omitted means the embedded default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        spec: Option<GmmSpec>,
        n: usize,
        #[serde(default)]
        n_val: usize,
        #[serde(default)]
        seed: u64,
    },
    Files {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        val_path: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Omitted means full batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shuffle: bool,
}

impl TrainSettings {
    pub fn to_train_config(&self) -> crate::refmodel::TrainConfig {
        crate::refmodel::TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size.unwrap_or(usize::MAX),
            seed: self.seed,
            shuffle: self.shuffle,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectRequest {
    pub target_dim: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepRequest {
    pub kind: RepKind,
    /// Gradient checkpoints; omitted means the first five epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_scale: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub project: Option<ProjectRequest>,
}

impl RepRequest {
    pub fn effective_lr_scale(&self) -> bool {
        self.lr_scale.unwrap_or(true)
    }

    pub fn effective_normalize(&self) -> bool {
        self.normalize.unwrap_or(false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Random,
    HardToLearn,
    S2l,
    Prototypicality,
    Semdedup,
    Less,
    SelfInfluence,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::HardToLearn => "hard_to_learn",
            Method::S2l => "s2l",
            Method::Prototypicality => "prototypicality",
            Method::Semdedup => "semdedup",
            Method::Less => "less",
            Method::SelfInfluence => "self_influence",
        }
    }

    /// Default representation when the request names none; `None` for
    /// selectors that read the trace or no data at all.
    pub fn default_representation(self) -> Option<RepKind> {
        match self {
            Method::Random | Method::HardToLearn => None,
            Method::S2l => Some(RepKind::DynamicsLoss),
            Method::Prototypicality | Method::Semdedup => Some(RepKind::HiddenStates),
            Method::Less | Method::SelfInfluence => Some(RepKind::Gradients),
        }
    }

    /// Whether the selector reduces to a score vector (and therefore supports
    /// the label-matching constraint).
    pub fn is_score_based(self) -> bool {
        matches!(
            self,
            Method::HardToLearn | Method::Prototypicality | Method::Less | Method::SelfInfluence
        )
    }

    pub fn needs_validation_set(self) -> bool {
        matches!(self, Method::Less)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelectorOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevance_aggregation: Option<Aggregation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectorRequest {
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub representation: Option<RepKind>,
    /// Budget fractions for this selector; omitted means the config-level
    /// budgets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budgets: Option<Vec<f64>>,
    #[serde(default)]
    pub label_match: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SelectorOverrides>,
}

impl SelectorRequest {
    /// The representation this request will run on (None for random).
    pub fn resolved_representation(&self) -> Option<RepKind> {
        match self.method {
            Method::Random => None,
            // Hard-to-learn reads the probability trajectory from the trace.
            Method::HardToLearn => Some(RepKind::DynamicsProb),
            _ => self.representation.or(self.method.default_representation()),
        }
    }

    /// `method__repkind` label; matches `Selection::label()` of the output.
    pub fn selection_label(&self) -> String {
        match self.resolved_representation() {
            Some(kind) => format!("{}__{kind}", self.method),
            None => format!("{}__none", self.method),
        }
    }

    pub fn selection_filename(&self, fraction: f64) -> String {
        format!("{}__{fraction}.json", self.selection_label())
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisToggles {
    #[serde(default = "default_true")]
    pub overlap: bool,
    #[serde(default = "default_true")]
    pub label_distribution: bool,
    #[serde(default = "default_true")]
    pub boundary_stats: bool,
    /// Checkpoint used for boundary stats; omitted means the final epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<usize>,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        AnalysisToggles {
            overlap: true,
            label_distribution: true,
            boundary_stats: true,
            epoch: None,
        }
    }
}

fn default_budgets() -> Vec<f64> {
    DEFAULT_BUDGET_GRID.to_vec()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub train: TrainSettings,
    pub representations: Vec<RepRequest>,
    pub selectors: Vec<SelectorRequest>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub selector_defaults: SelectorConfig,
    #[serde(default)]
    pub analysis: AnalysisToggles,
    /// Where outputs go when `--out` is not given. Never serialized: the
    /// written `config.json` must not depend on the launch location.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(json: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(json)
            .map_err(|e| Error::config("/", format!("schema violation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn paper_synthetic() -> RunConfig {
        RunConfig::from_json(PAPER_SYNTHETIC_CONFIG).expect("embedded config is valid")
    }

    /// Budget fractions a selector request will run at.
    pub fn budgets_for<'a>(&'a self, req: &'a SelectorRequest) -> &'a [f64] {
        req.budgets.as_deref().unwrap_or(&self.budgets)
    }

    /// Selector config after applying per-request overrides.
    pub fn selector_config_for(&self, req: &SelectorRequest) -> SelectorConfig {
        let mut cfg = self.selector_defaults;
        if let Some(over) = &req.config {
            if let Some(k) = over.k_clusters {
                cfg.k_clusters = Some(k);
            }
            if let Some(t) = over.dedup_threshold {
                cfg.dedup_threshold = t;
            }
            if let Some(s) = over.seed {
                cfg.seed = s;
            }
            if let Some(a) = over.relevance_aggregation {
                cfg.relevance_aggregation = a;
            }
        }
        cfg
    }

    pub fn has_validation_source(&self) -> bool {
        match &self.dataset {
            DatasetSource::Generate { n_val, .. } => *n_val > 0,
            DatasetSource::Files { val_path, .. } => val_path.is_some(),
        }
    }

    /// Selection filenames the pipeline will produce, in config order.
    pub fn expected_selection_files(&self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for req in &self.selectors {
            for &fraction in self.budgets_for(req) {
                names.push(req.selection_filename(fraction));
            }
        }
        let mut sorted = names.clone();
        sorted.sort();
        if let Some(dup) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::validation(format!(
                "duplicate selector output {}",
                dup[0]
            )));
        }
        Ok(names)
    }

    /// Overrides every stage seed at once (CLI `--seed`).
    pub fn apply_seed_override(&mut self, seed: u64) {
        if let DatasetSource::Generate { seed: s, .. } = &mut self.dataset {
            *s = seed;
        }
        self.train.seed = seed;
        self.selector_defaults.seed = seed;
        for req in &mut self.selectors {
            if let Some(over) = &mut req.config {
                over.seed = Some(seed);
            }
        }
        for rep in &mut self.representations {
            if let Some(p) = &mut rep.project {
                p.seed = seed;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems: Vec<(String, String)> = Vec::new();
        let mut fault = |ptr: String, msg: String| problems.push((ptr, msg));

        match &self.dataset {
            DatasetSource::Generate { spec, n, .. } => {
                if *n == 0 {
                    fault("/dataset/generate/n".into(), "must be ≥ 1".into());
                }
                if let Some(spec) = spec {
                    if let Err(e) = spec.validate() {
                        fault("/dataset/generate/spec".into(), e.to_string());
                    } else if !spec.covers_both_labels() {
                        fault(
                            "/dataset/generate/spec".into(),
                            "classification runs need components of both labels".into(),
                        );
                    }
                }
            }
            DatasetSource::Files { path, .. } => {
                if path.as_os_str().is_empty() {
                    fault("/dataset/files/path".into(), "must not be empty".into());
                }
            }
        }

        if self.train.epochs == 0 {
            fault("/train/epochs".into(), "must be ≥ 1".into());
        }
        if !(self.train.learning_rate > 0.0) {
            fault("/train/learning_rate".into(), "must be positive".into());
        }
        if self.train.batch_size == Some(0) {
            fault("/train/batch_size".into(), "must be ≥ 1".into());
        }

        for (i, fraction) in self.budgets.iter().enumerate() {
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                fault(format!("/budgets/{i}"), format!("must lie in (0, 1], got {fraction}"));
            }
        }

        let mut declared: Vec<RepKind> = Vec::new();
        for (i, rep) in self.representations.iter().enumerate() {
            if declared.contains(&rep.kind) {
                fault(
                    format!("/representations/{i}/kind"),
                    format!("representation {} declared twice", rep.kind),
                );
            }
            declared.push(rep.kind);
            if rep.kind != RepKind::Gradients {
                if rep.checkpoints.is_some() || rep.lr_scale.is_some() || rep.normalize.is_some()
                {
                    fault(
                        format!("/representations/{i}"),
                        "checkpoints/lr_scale/normalize apply only to gradients".into(),
                    );
                }
            } else if let Some(cps) = &rep.checkpoints {
                if cps.is_empty() {
                    fault(
                        format!("/representations/{i}/checkpoints"),
                        "needs ≥ 1 checkpoint".into(),
                    );
                }
                for (j, &t) in cps.iter().enumerate() {
                    if t == 0 || t > self.train.epochs {
                        fault(
                            format!("/representations/{i}/checkpoints/{j}"),
                            format!("epoch {t} out of range 1..={}", self.train.epochs),
                        );
                    }
                }
            }
            if let Some(p) = &rep.project {
                if p.target_dim == 0 {
                    fault(
                        format!("/representations/{i}/project/target_dim"),
                        "must be ≥ 1".into(),
                    );
                }
            }
        }

        if self.selectors.is_empty() {
            fault("/selectors".into(), "needs ≥ 1 selector request".into());
        }
        for (i, req) in self.selectors.iter().enumerate() {
            match req.method {
                Method::Random | Method::HardToLearn => {
                    if req.representation.is_some() {
                        fault(
                            format!("/selectors/{i}/representation"),
                            format!("{} does not take a representation", req.method),
                        );
                    }
                }
                _ => {
                    let kind = req
                        .representation
                        .or(req.method.default_representation())
                        .expect("non-trace selectors have a default representation");
                    if !declared.contains(&kind) {
                        fault(
                            format!("/selectors/{i}/representation"),
                            format!("representation {kind} is not declared under /representations"),
                        );
                    }
                    if matches!(req.method, Method::SelfInfluence) && kind != RepKind::Gradients {
                        fault(
                            format!("/selectors/{i}/representation"),
                            "self_influence requires the gradients representation".into(),
                        );
                    }
                    if kind == RepKind::Gradients
                        && matches!(req.method, Method::Less | Method::SelfInfluence)
                    {
                        if let Some(rep) = self.representations.iter().find(|r| r.kind == kind) {
                            if !rep.effective_lr_scale() {
                                fault(
                                    format!("/selectors/{i}"),
                                    format!(
                                        "{} needs the gradients representation built with lr_scale",
                                        req.method
                                    ),
                                );
                            }
                        }
                    }
                }
            }
            if req.method.needs_validation_set() && !self.has_validation_source() {
                fault(
                    format!("/selectors/{i}"),
                    "less needs a validation set (dataset.generate.n_val or dataset.files.val_path)"
                        .into(),
                );
            }
            if req.label_match && !req.method.is_score_based() {
                fault(
                    format!("/selectors/{i}/label_match"),
                    format!("{} is not score-based; label matching is unsupported", req.method),
                );
            }
            if let Some(budgets) = &req.budgets {
                for (j, fraction) in budgets.iter().enumerate() {
                    if !(*fraction > 0.0 && *fraction <= 1.0) {
                        fault(
                            format!("/selectors/{i}/budgets/{j}"),
                            format!("must lie in (0, 1], got {fraction}"),
                        );
                    }
                }
            }
            if let Some(over) = &req.config {
                if over.k_clusters == Some(0) {
                    fault(format!("/selectors/{i}/config/k_clusters"), "must be ≥ 1".into());
                }
                if let Some(t) = over.dedup_threshold {
                    if !(t > 0.0 && t <= 1.0) {
                        fault(
                            format!("/selectors/{i}/config/dedup_threshold"),
                            format!("must lie in (0, 1], got {t}"),
                        );
                    }
                }
            }
        }

        if let Err(e) = self.selector_defaults.validate() {
            fault("/selector_defaults".into(), e.to_string());
        }
        if let Err(e) = self.expected_selection_files() {
            fault("/selectors".into(), e.to_string());
        }
        if let Some(epoch) = self.analysis.epoch {
            if epoch > self.train.epochs {
                fault(
                    "/analysis/epoch".into(),
                    format!("epoch {epoch} out of range 0..={}", self.train.epochs),
                );
            }
        }

        match problems.len() {
            0 => Ok(()),
            _ => {
                let pointer = problems[0].0.clone();
                let msg = problems
                    .iter()
                    .map(|(p, m)| format!("{p}: {m}"))
                    .collect::<Vec<_>>()
                    .join("; ");
                Err(Error::Config { pointer, msg })
            }
        }
    }
}
