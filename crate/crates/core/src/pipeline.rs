//! Stage runners wiring the modules into reproducible runs.
//!
//! Every stage reads its inputs back from the run directory rather than from
//! memory, so `run` is byte-identical to executing the stages one command at
//! a time, and re-running any stage on unchanged inputs rewrites identical
//! files.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;

use crate::analysis;
use crate::config::{layout, DatasetSource, Method, RepRequest, RunConfig};
use crate::data::{Budget, Dataset, RepKind, Representation, Selection, SelectionRepKind, ValidationSet};
use crate::error::{Error, Result};
use crate::io;
use crate::refmodel::{self, CheckpointTrace};
use crate::representations::{
    default_checkpoints, dynamics, evaluate_dynamics, gradients, hidden_states, random_project,
    DynamicsVariant,
};
use crate::selectors;

/// generate → train → extract → select → analyze/report.
pub fn run_all(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<()> {
    stage_generate(cfg, out)?;
    stage_train(out)?;
    stage_extract(out)?;
    stage_select(out, jobs)?;
    analysis::report(out)
}

fn load_config(out: &Path) -> Result<RunConfig> {
    let cfg: RunConfig = io::read_json(out.join(layout::CONFIG))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Writes the resolved config plus the dataset (and validation set when the
/// source provides one) into the run directory.
pub fn stage_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    io::write_json(cfg, out.join(layout::CONFIG))?;

    let (dataset, valset): (Dataset, Option<ValidationSet>) = match &cfg.dataset {
        DatasetSource::Generate { spec, n, n_val, seed } => {
            let spec = match spec {
                Some(s) => s.clone(),
                None => crate::synthgen::GmmSpec::default_spec(),
            };
            if *n_val > 0 {
                let (train, val) = crate::synthgen::generate_split(&spec, *n, *n_val, *seed)?;
                (train, Some(val))
            } else {
                (crate::synthgen::generate(&spec, *n, *seed)?, None)
            }
        }
        DatasetSource::Files { path, val_path } => {
            let dataset = io::load_dataset(path)?;
            let valset = match val_path {
                Some(vp) => Some(ValidationSet::new(io::load_dataset(vp)?, &dataset)?),
                None => None,
            };
            (dataset, valset)
        }
    };

    io::save_dataset(&dataset, out.join(layout::DATASET))?;
    if let Some(val) = &valset {
        io::save_dataset(val.dataset(), out.join(layout::VALIDATION))?;
    }
    Ok(())
}

pub fn stage_train(out: &Path) -> Result<()> {
    let cfg = load_config(out)?;
    let dataset = io::load_dataset(out.join(layout::DATASET))?;
    let trace = refmodel::train(&dataset, &cfg.train.to_train_config())?;
    refmodel::save_trace(&trace, out.join(layout::TRACE_META), out.join(layout::TRACE_BIN))
}

fn build_representation(
    req: &RepRequest,
    dataset: &Dataset,
    trace: &CheckpointTrace,
    for_validation: bool,
) -> Result<Representation> {
    let rep = match req.kind {
        RepKind::HiddenStates => hidden_states(dataset),
        RepKind::DynamicsProb | RepKind::DynamicsLoss => {
            let variant = if req.kind == RepKind::DynamicsProb {
                DynamicsVariant::Prob
            } else {
                DynamicsVariant::Loss
            };
            if for_validation {
                evaluate_dynamics(trace, dataset, variant)?
            } else {
                dynamics(trace, variant)
            }
        }
        RepKind::Gradients => {
            let cps = match &req.checkpoints {
                Some(cps) => cps.clone(),
                None => default_checkpoints(trace.epochs()),
            };
            gradients(
                trace,
                dataset,
                &cps,
                req.effective_lr_scale(),
                req.effective_normalize(),
            )?
        }
    };
    match &req.project {
        Some(p) => random_project(&rep, p.target_dim, p.seed, true),
        None => Ok(rep),
    }
}

/// Builds and stores every requested representation; selectors that score
/// against validation data additionally get a validation-set twin built with
/// identical options.
pub fn stage_extract(out: &Path) -> Result<()> {
    let cfg = load_config(out)?;
    let dataset = io::load_dataset(out.join(layout::DATASET))?;
    let trace = refmodel::load_trace(out.join(layout::TRACE_META), out.join(layout::TRACE_BIN))?;

    for req in &cfg.representations {
        let rep = build_representation(req, &dataset, &trace, false)?;
        io::save_representation(
            &rep,
            out.join(layout::rep_meta(req.kind)),
            out.join(layout::rep_bin(req.kind)),
        )?;
    }

    let val_kinds: BTreeSet<RepKind> = cfg
        .selectors
        .iter()
        .filter(|req| req.method.needs_validation_set())
        .filter_map(|req| req.resolved_representation())
        .map(|kind| match kind {
            RepKind::DynamicsProb => RepKind::DynamicsProb,
            other => other,
        })
        .collect();
    if !val_kinds.is_empty() {
        let val_path = out.join(layout::VALIDATION);
        if !val_path.exists() {
            return Err(Error::validation(
                "config requests validation-based selection but the run has no validation set",
            ));
        }
        let val = io::load_dataset(val_path)?;
        let val = ValidationSet::new(val, &dataset)?;
        for kind in val_kinds {
            let req = cfg
                .representations
                .iter()
                .find(|r| r.kind == kind)
                .ok_or_else(|| {
                    Error::validation(format!("representation {kind} is not declared"))
                })?;
            let rep = build_representation(req, val.dataset(), &trace, true)?;
            io::save_representation(
                &rep,
                out.join(layout::val_rep_meta(kind)),
                out.join(layout::val_rep_bin(kind)),
            )?;
        }
    }
    Ok(())
}

struct SelectJob<'a> {
    req: &'a crate::config::SelectorRequest,
    fraction: f64,
}

fn run_selector(
    job: &SelectJob<'_>,
    cfg: &RunConfig,
    dataset: &Dataset,
    trace: &CheckpointTrace,
    out: &Path,
) -> Result<Selection> {
    let budget = Budget::from_fraction(job.fraction, dataset.len())?;
    let sel_cfg = cfg.selector_config_for(job.req);
    let load_rep = |kind: RepKind| -> Result<Representation> {
        io::load_representation(
            out.join(layout::rep_meta(kind)),
            out.join(layout::rep_bin(kind)),
        )
    };
    let load_val_rep = |kind: RepKind| -> Result<Representation> {
        io::load_representation(
            out.join(layout::val_rep_meta(kind)),
            out.join(layout::val_rep_bin(kind)),
        )
    };

    match job.req.method {
        Method::Random => selectors::random_select(dataset, budget, sel_cfg.seed),
        Method::HardToLearn => {
            if job.req.label_match {
                let scores = selectors::hard_to_learn_scores(trace);
                selectors::apply_label_matching(
                    &scores,
                    dataset,
                    budget,
                    "hard_to_learn",
                    SelectionRepKind::DynamicsProb,
                    0,
                )
            } else {
                selectors::hard_to_learn(trace, dataset, budget)
            }
        }
        Method::S2l => {
            let kind = job.req.resolved_representation().expect("validated");
            selectors::s2l(&load_rep(kind)?, budget, &sel_cfg)
        }
        Method::Prototypicality => {
            let kind = job.req.resolved_representation().expect("validated");
            let rep = load_rep(kind)?;
            if job.req.label_match {
                let scores = selectors::prototypicality_scores(&rep, &sel_cfg)?;
                selectors::apply_label_matching(
                    &scores,
                    dataset,
                    budget,
                    "prototypicality",
                    SelectionRepKind::from(kind),
                    sel_cfg.seed,
                )
            } else {
                selectors::prototypicality(&rep, budget, &sel_cfg)
            }
        }
        Method::Semdedup => {
            let kind = job.req.resolved_representation().expect("validated");
            selectors::semdedup(&load_rep(kind)?, budget, &sel_cfg)
        }
        Method::Less => {
            let kind = job.req.resolved_representation().expect("validated");
            let train_rep = load_rep(kind)?;
            let val_rep = load_val_rep(kind)?;
            if job.req.label_match {
                let scores = selectors::less_scores(&train_rep, &val_rep, &sel_cfg)?;
                selectors::apply_label_matching(
                    &scores,
                    dataset,
                    budget,
                    "less",
                    SelectionRepKind::from(kind),
                    sel_cfg.seed,
                )
            } else {
                selectors::less(&train_rep, &val_rep, budget, &sel_cfg)
            }
        }
        Method::SelfInfluence => {
            let kind = job.req.resolved_representation().expect("validated");
            let rep = load_rep(kind)?;
            if job.req.label_match {
                let scores = selectors::self_influence_scores(&rep)?;
                selectors::apply_label_matching(
                    &scores,
                    dataset,
                    budget,
                    "self_influence",
                    SelectionRepKind::from(kind),
                    0,
                )
            } else {
                selectors::self_influence(&rep, budget)
            }
        }
    }
}

/// Runs every selector×budget job; independent jobs run on a bounded worker
/// pool and write to distinct files.
pub fn stage_select(out: &Path, jobs: usize) -> Result<()> {
    let cfg = load_config(out)?;
    let dataset = io::load_dataset(out.join(layout::DATASET))?;
    let trace = refmodel::load_trace(out.join(layout::TRACE_META), out.join(layout::TRACE_BIN))?;

    let mut job_list = Vec::new();
    for req in &cfg.selectors {
        for &fraction in cfg.budgets_for(req) {
            job_list.push(SelectJob { req, fraction });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::validation(format!("worker pool: {e}")))?;
    pool.install(|| {
        job_list
            .par_iter()
            .map(|job| {
                let sel = run_selector(job, &cfg, &dataset, &trace, out)?;
                let name = job.req.selection_filename(job.fraction);
                io::save_selection(&sel, out.join(layout::SELECTIONS_DIR).join(name))
            })
            .collect::<Result<Vec<()>>>()
    })?;
    Ok(())
}

/// Rebuilds the overlap CSV over the selections a run directory promises.
pub fn overlap_csv(out: &Path) -> Result<String> {
    let cfg = load_config(out)?;
    let mut groups: std::collections::BTreeMap<u64, Vec<Selection>> = Default::default();
    for req in &cfg.selectors {
        for &fraction in cfg.budgets_for(req) {
            let path = out
                .join(layout::SELECTIONS_DIR)
                .join(req.selection_filename(fraction));
            let sel = io::load_selection(&path)?;
            groups.entry(fraction.to_bits()).or_default().push(sel);
        }
    }
    let matrices = groups
        .values()
        .map(|g| analysis::overlap_matrix(g))
        .collect::<Result<Vec<_>>>()?;
    Ok(analysis::overlap_matrices_csv(&matrices))
}
