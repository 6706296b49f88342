//! Dataset manifests: one JSON object per line. Paths are relative to the
//! manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::SynthParamsJson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub scene_id: String,
    pub frame_id: String,
    pub input_path: String,
    pub gt_path: String,
    pub mask_path: String,
    pub params: SynthParamsJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

impl ManifestRecord {
    pub fn resolve(&self, base: &Path) -> (PathBuf, PathBuf, PathBuf) {
        (
            base.join(&self.input_path),
            base.join(&self.gt_path),
            base.join(&self.mask_path),
        )
    }
}

/// Directory that manifest paths are relative to.
pub fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn to_jsonl(records: &[ManifestRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    crate::io::ensure_parent(path)?;
    fs::write(path, to_jsonl(records)).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}: bad record", path.display(), i + 1)))
        .collect()
}
