//! Selection analysis: overlap ratios, label distributions, boundary
//! statistics, and the consolidated run report.
//!
//! Overlap is defined on instance ids, never on feature values, so selections
//! made from different representations remain comparable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{layout, RunConfig};
use crate::data::{Budget, Dataset, Label, Selection};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::dot;
use crate::refmodel::CheckpointTrace;

/// `|S₁ ∩ S₂| / |S₁|` on sorted id lists.
pub fn overlap_ratio(s1: &Selection, s2: &Selection) -> f64 {
    let (a, b) = (&s1.selected_ids, &s2.selected_ids);
    let mut i = 0;
    let mut j = 0;
    let mut shared = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    shared as f64 / a.len() as f64
}

/// Pairwise overlap ratios between selections sharing one budget.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub budget: Budget,
}

pub fn overlap_matrix(selections: &[Selection]) -> Result<OverlapMatrix> {
    if selections.is_empty() {
        return Err(Error::validation("overlap matrix needs ≥ 1 selection"));
    }
    let budget = selections[0].budget;
    if selections
        .iter()
        .any(|s| s.budget.count() != budget.count())
    {
        return Err(Error::validation(
            "overlap matrix requires selections that share one budget",
        ));
    }
    let labels = selections.iter().map(Selection::label).collect();
    let values = selections
        .iter()
        .map(|s1| selections.iter().map(|s2| overlap_ratio(s1, s2)).collect())
        .collect();
    Ok(OverlapMatrix {
        labels,
        values,
        budget,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelDistRow {
    pub budget_fraction: f64,
    pub method: String,
    pub positive_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelDistributionTable {
    pub rows: Vec<LabelDistRow>,
}

/// Fraction of +1 labels inside each selection.
pub fn label_distribution(
    selections: &[Selection],
    dataset: &Dataset,
) -> Result<LabelDistributionTable> {
    let by_id: std::collections::HashMap<u64, Label> = dataset
        .ids()
        .iter()
        .copied()
        .zip(dataset.labels().iter().copied())
        .collect();
    let mut rows = Vec::with_capacity(selections.len());
    for sel in selections {
        let mut pos = 0usize;
        for id in &sel.selected_ids {
            match by_id.get(id) {
                Some(Label::Pos) => pos += 1,
                Some(Label::Neg) => {}
                None => {
                    return Err(Error::validation(format!(
                        "selected id {id} is not in the dataset"
                    )))
                }
            }
        }
        rows.push(LabelDistRow {
            budget_fraction: sel.budget.fraction(),
            method: sel.label(),
            positive_ratio: pos as f64 / sel.selected_ids.len() as f64,
        });
    }
    Ok(LabelDistributionTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryStats {
    pub mean_abs_z: f64,
    pub frac_misclassified: f64,
}

/// Margin statistics of a selection at one checkpoint: mean |z| and the
/// fraction with z < 0. `epoch = None` uses the final checkpoint.
pub fn boundary_stats(
    selection: &Selection,
    trace: &CheckpointTrace,
    dataset: &Dataset,
    epoch: Option<usize>,
) -> Result<BoundaryStats> {
    let t = epoch.unwrap_or_else(|| trace.epochs());
    if t > trace.epochs() {
        return Err(Error::validation(format!(
            "epoch {t} out of range 0..={}",
            trace.epochs()
        )));
    }
    let w = trace.weights_at(t);
    let ext = dataset.features().with_bias_column();
    if ext.cols() != w.len() {
        return Err(Error::validation(
            "dataset dimension does not match trace weights",
        ));
    }
    let rows = dataset.row_index();
    let mut abs_sum = 0.0;
    let mut neg = 0usize;
    for id in &selection.selected_ids {
        let &row = rows
            .get(id)
            .ok_or_else(|| Error::validation(format!("selected id {id} is not in the dataset")))?;
        let z = dataset.label(row).sign() * dot(w, ext.row(row));
        abs_sum += z.abs();
        if z < 0.0 {
            neg += 1;
        }
    }
    let n = selection.selected_ids.len() as f64;
    Ok(BoundaryStats {
        mean_abs_z: abs_sum / n,
        frac_misclassified: neg as f64 / n,
    })
}

// ── CSV rendering (fixed column orders) ─────────────────────────────────────

pub fn overlap_matrices_csv(matrices: &[OverlapMatrix]) -> String {
    let mut out = String::from("budget_fraction,row,col,ratio\n");
    for m in matrices {
        for (i, row_label) in m.labels.iter().enumerate() {
            for (j, col_label) in m.labels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    m.budget.fraction(),
                    row_label,
                    col_label,
                    m.values[i][j]
                );
            }
        }
    }
    out
}

pub fn label_distribution_csv(table: &LabelDistributionTable) -> String {
    let mut out = String::from("budget_fraction,method,positive_ratio\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{}", r.budget_fraction, r.method, r.positive_ratio);
    }
    out
}

pub fn boundary_stats_csv(rows: &[(f64, String, usize, BoundaryStats)]) -> String {
    let mut out = String::from("budget_fraction,method,epoch,mean_abs_z,frac_misclassified\n");
    for (budget, method, epoch, stats) in rows {
        let _ = writeln!(
            out,
            "{budget},{method},{epoch},{},{}",
            stats.mean_abs_z, stats.frac_misclassified
        );
    }
    out
}

// ── consolidated report ─────────────────────────────────────────────────────

#[derive(Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    inputs: Vec<ManifestEntry>,
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Emits the report bundle into `<run_dir>/report/`: overlap matrix CSV,
/// label-distribution CSV, boundary-stats CSV (as enabled in the run config),
/// and a manifest JSON hashing every input file. Re-running on unchanged
/// inputs is byte-identical.
pub fn report(run_dir: &Path) -> Result<()> {
    let config_path = run_dir.join(layout::CONFIG);
    if !config_path.exists() {
        return Err(Error::validation(format!(
            "{} has no {} (empty or foreign run directory)",
            run_dir.display(),
            layout::CONFIG
        )));
    }
    let cfg: RunConfig = io::read_json(&config_path)?;
    let dataset = io::load_dataset(run_dir.join(layout::DATASET))?;
    let trace = crate::refmodel::load_trace(
        run_dir.join(layout::TRACE_META),
        run_dir.join(layout::TRACE_BIN),
    )?;

    // Every selection the config promises must exist.
    let expected = cfg.expected_selection_files()?;
    let missing: Vec<String> = expected
        .iter()
        .filter(|name| !run_dir.join(layout::SELECTIONS_DIR).join(name).exists())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::validation(format!(
            "missing selection files: {}",
            missing.join(", ")
        )));
    }

    let mut selections = Vec::with_capacity(expected.len());
    for name in &expected {
        let sel = io::load_selection(run_dir.join(layout::SELECTIONS_DIR).join(name))?;
        sel.validate_against(&dataset)?;
        selections.push(sel);
    }

    let report_dir = run_dir.join(layout::REPORT_DIR);
    fs::create_dir_all(&report_dir).map_err(|e| Error::io(&report_dir, e))?;

    if cfg.analysis.overlap {
        // Group selections per budget, preserving config order inside a group.
        let mut groups: BTreeMap<u64, Vec<Selection>> = BTreeMap::new();
        for sel in &selections {
            groups
                .entry(sel.budget.fraction().to_bits())
                .or_default()
                .push(sel.clone());
        }
        let matrices: Vec<OverlapMatrix> = groups
            .values()
            .map(|group| overlap_matrix(group))
            .collect::<Result<_>>()?;
        io::write_atomic(
            report_dir.join(layout::OVERLAP_CSV),
            overlap_matrices_csv(&matrices).as_bytes(),
        )?;
    }

    if cfg.analysis.label_distribution {
        let table = label_distribution(&selections, &dataset)?;
        io::write_atomic(
            report_dir.join(layout::LABEL_DIST_CSV),
            label_distribution_csv(&table).as_bytes(),
        )?;
    }

    if cfg.analysis.boundary_stats {
        let mut rows = Vec::with_capacity(selections.len());
        for sel in &selections {
            let stats = boundary_stats(sel, &trace, &dataset, cfg.analysis.epoch)?;
            rows.push((
                sel.budget.fraction(),
                sel.label(),
                cfg.analysis.epoch.unwrap_or_else(|| trace.epochs()),
                stats,
            ));
        }
        io::write_atomic(
            report_dir.join(layout::BOUNDARY_CSV),
            boundary_stats_csv(&rows).as_bytes(),
        )?;
    }

    // Manifest over every input file (report outputs excluded).
    let mut inputs: Vec<String> = vec![layout::CONFIG.into(), layout::DATASET.into()];
    let val_path = run_dir.join(layout::VALIDATION);
    if val_path.exists() {
        inputs.push(layout::VALIDATION.into());
    }
    inputs.push(layout::TRACE_META.into());
    inputs.push(layout::TRACE_BIN.into());
    for dir in [layout::REPS_DIR, layout::SELECTIONS_DIR] {
        let full = run_dir.join(dir);
        if full.is_dir() {
            let mut names: Vec<String> = fs::read_dir(&full)
                .map_err(|e| Error::io(&full, e))?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().is_file())
                .map(|e| format!("{dir}/{}", e.file_name().to_string_lossy()))
                .collect();
            names.sort();
            inputs.extend(names);
        }
    }
    let manifest = Manifest {
        inputs: inputs
            .iter()
            .map(|rel| {
                Ok(ManifestEntry {
                    path: rel.clone(),
                    sha256: sha256_hex(&run_dir.join(rel))?,
                })
            })
            .collect::<Result<_>>()?,
    };
    io::write_json(&manifest, report_dir.join(layout::MANIFEST))
}
