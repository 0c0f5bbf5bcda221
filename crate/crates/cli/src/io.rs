//! Versioned on-disk documents.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use reflexnav_core::model::{Checkpoint, Dataset, ImportanceReport};
use reflexnav_core::SolverReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const DATASET_FORMAT: &str = "reflexnav-dataset";
pub const TRACE_FORMAT: &str = "reflexnav-solver-trace";
pub const IMPORTANCE_FORMAT: &str = "reflexnav-importance";
pub const FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub dataset: Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub report: SolverReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub report: ImportanceReport,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    let f: DatasetFile = read_json(path)?;
    if f.format != DATASET_FORMAT || f.version != FILE_VERSION {
        bail!("{}: expected {DATASET_FORMAT} v{FILE_VERSION}, found {} v{}", path.display(), f.format, f.version);
    }
    f.dataset
        .validate()
        .with_context(|| format!("invalid dataset in {}", path.display()))?;
    Ok(f)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Checkpoint::from_json(&text).with_context(|| format!("loading checkpoint {}", path.display()))
}
