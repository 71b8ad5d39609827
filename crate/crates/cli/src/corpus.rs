//! Shared helpers for labeled corpora on disk: the `labels.csv` ground-truth
//! table and recursive fingerprint-map discovery.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use faintprint::fingerprint::read_map;
use faintprint::pipeline::LabeledMap;
use serde::{Deserialize, Serialize};

/// One row of `labels.csv`: ground truth for a single source video.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelRow {
    pub source_id: String,
    /// `real` or `fake`.
    pub label: String,
    pub hr_bpm: f64,
    pub seed: u64,
}

impl LabelRow {
    pub fn fake(&self) -> bool {
        self.label == "fake"
    }
}

/// Reads a `labels.csv` written by `synthesize` (columns sourceId, label,
/// hrBpm, seed).
pub fn read_labels(path: &Path) -> Result<Vec<LabelRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open labels file {}", path.display()))?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: LabelRow =
            record.with_context(|| format!("malformed row in {}", path.display()))?;
        if row.label != "real" && row.label != "fake" {
            bail!(
                "{}: label for {} must be 'real' or 'fake', got '{}'",
                path.display(),
                row.source_id,
                row.label
            );
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Merges `rows` into `labels.csv`, replacing rows that share a source id and
/// keeping the file sorted by source id so repeated runs are byte-identical.
pub fn merge_labels(path: &Path, rows: &[LabelRow]) -> Result<()> {
    let mut table: BTreeMap<String, LabelRow> = BTreeMap::new();
    if path.exists() {
        for row in read_labels(path)? {
            table.insert(row.source_id.clone(), row);
        }
    }
    for row in rows {
        table.insert(row.source_id.clone(), row.clone());
    }
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot write labels file {}", path.display()))?;
    for row in table.values() {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Builds a `source_id -> fake` lookup, rejecting duplicate ids.
pub fn label_lookup(rows: &[LabelRow]) -> Result<BTreeMap<String, bool>> {
    let mut table = BTreeMap::new();
    for row in rows {
        if table.insert(row.source_id.clone(), row.fake()).is_some() {
            bail!("labels list {} twice", row.source_id);
        }
    }
    Ok(table)
}

/// Recursively collects every `.png` under `dir`, sorted by path so later
/// processing runs in a deterministic order.
pub fn find_maps(dir: &Path) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        let entries =
            fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, found)?;
            } else if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
            {
                found.push(path);
            }
        }
        Ok(())
    }
    let mut found = Vec::new();
    walk(dir, &mut found)?;
    found.sort();
    if found.is_empty() {
        bail!("no fingerprint maps (*.png) found under {}", dir.display());
    }
    Ok(found)
}

/// Loads every map under `dir` and attaches its ground truth from `labels`.
pub fn load_labeled_maps(dir: &Path, labels: &BTreeMap<String, bool>) -> Result<Vec<LabeledMap>> {
    let mut maps = Vec::new();
    for path in find_maps(dir)? {
        let map = read_map(&path).with_context(|| format!("cannot load map {}", path.display()))?;
        let fake = *labels.get(&map.source_id).with_context(|| {
            format!(
                "labels have no entry for source {} (map {})",
                map.source_id,
                path.display()
            )
        })?;
        maps.push(LabeledMap { map, fake });
    }
    Ok(maps)
}
