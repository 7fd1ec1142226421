//! Deterministic file formats.
//!
//! - Dataset: JSON Lines, one `{"id": .., "features": [..], "label": -1|1}`
//!   object per line.
//! - Representation: a `<name>.meta.json` + `<name>.bin` pair; the binary
//!   payload is raw little-endian float32, row-major.
//! - Selection: a single JSON object mirroring [`Selection`].
//!
//! Matrices are stored as float32 on disk and promoted to float64 in memory.
//! Every load re-validates the domain invariants; nothing is deferred to
//! downstream modules.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, RepKind, Representation, Selection};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Serialize, Deserialize)]
struct DatasetRecord {
    id: u64,
    features: Vec<f64>,
    label: i64,
}

/// Loads a JSON-Lines dataset. Blank lines are skipped; any malformed record,
/// duplicate id, out-of-range label, or non-finite feature is reported with
/// its line number.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut width: Option<usize> = None;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DatasetRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, line_no, format!("malformed record: {e}")))?;
        let label = Label::from_int(rec.label).ok_or_else(|| {
            Error::parse(path, line_no, format!("label must be -1 or 1, got {}", rec.label))
        })?;
        if let Some(bad) = rec.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::parse(
                path,
                line_no,
                format!("non-finite feature value {bad}"),
            ));
        }
        match width {
            None => width = Some(rec.features.len()),
            Some(w) if w != rec.features.len() => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {w} features, found {}", rec.features.len()),
                ));
            }
            _ => {}
        }
        if !seen.insert(rec.id) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate instance id {}", rec.id),
            ));
        }
        ids.push(rec.id);
        rows.push(rec.features);
        labels.push(label);
    }

    if ids.is_empty() {
        return Err(Error::validation("dataset must contain ≥ 1 instance"));
    }
    Dataset::new(ids, Matrix::from_rows(&rows), labels)
}

/// Writes a dataset in the JSON-Lines format read by [`load_dataset`].
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in 0..dataset.len() {
        let rec = DatasetRecord {
            id: dataset.id(row),
            features: dataset.features().row(row).to_vec(),
            label: i64::from(dataset.label(row).as_int()),
        };
        out.push_str(&serde_json::to_string(&rec).map_err(|e| Error::json(path, e))?);
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

#[derive(Serialize, Deserialize)]
struct RepMetaFile {
    kind: RepKind,
    rows: usize,
    cols: usize,
    dtype: String,
    order: String,
    checkpoints: Vec<usize>,
    lr_scaled: bool,
    projection_seed: Option<u64>,
    /// Instance ids aligned with the matrix rows. Optional on load so files
    /// written by other tools (without ids) still parse; rows then map to
    /// ids 0..rows.
    #[serde(default)]
    row_ids: Option<Vec<u64>>,
}

pub fn save_representation(
    rep: &Representation,
    meta_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<()> {
    let meta = RepMetaFile {
        kind: rep.kind(),
        rows: rep.matrix().rows(),
        cols: rep.matrix().cols(),
        dtype: "f32".to_string(),
        order: "row-major".to_string(),
        checkpoints: rep.checkpoints().to_vec(),
        lr_scaled: rep.lr_scaled(),
        projection_seed: rep.projection_seed(),
        row_ids: Some(rep.row_ids().to_vec()),
    };
    write_json(&meta, meta_path)?;
    write_f32_payload(rep.matrix().data(), data_path)
}

pub fn load_representation(
    meta_path: impl AsRef<Path>,
    data_path: impl AsRef<Path>,
) -> Result<Representation> {
    let meta: RepMetaFile = read_json(&meta_path)?;
    if meta.dtype != "f32" {
        return Err(Error::validation(format!(
            "unsupported dtype {:?}, expected \"f32\"",
            meta.dtype
        )));
    }
    if meta.order != "row-major" {
        return Err(Error::validation(format!(
            "unsupported order {:?}, expected \"row-major\"",
            meta.order
        )));
    }
    let data = read_f32_payload(&data_path, meta.rows * meta.cols)?;
    let row_ids = match meta.row_ids {
        Some(ids) => ids,
        None => (0..meta.rows as u64).collect(),
    };
    Representation::new(
        meta.kind,
        Matrix::from_vec(meta.rows, meta.cols, data),
        row_ids,
        meta.checkpoints,
        meta.lr_scaled,
        meta.projection_seed,
    )
}

pub fn save_selection(sel: &Selection, path: impl AsRef<Path>) -> Result<()> {
    write_json(sel, path)
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<Selection> {
    let sel: Selection = read_json(&path)?;
    sel.validate()?;
    Ok(sel)
}

// ── shared helpers ──────────────────────────────────────────────────────────

pub(crate) fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    body.push('\n');
    write_atomic(path, body.as_bytes())
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::json(path, e))
}

/// Writes a float64 slice as raw little-endian float32.
pub(crate) fn write_f32_payload(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Reads exactly `count` little-endian float32 values, promoted to float64.
pub(crate) fn read_f32_payload(path: impl AsRef<Path>, count: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = count * 4;
    if bytes.len() != expected {
        return Err(Error::validation(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect())
}

pub(crate) fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}
