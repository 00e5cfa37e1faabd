//! `report.json`: what ran, on which inputs, against which tolerances.

use std::collections::BTreeMap;
use std::path::Path;

use aggrokin_core::io::write_json;
use aggrokin_core::report::Check;
use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, LoadedConfig};

/// SHA-256 over `blob <len>\0<bytes>`, the object format git uses.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: String,
    pub hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Inputs {
    pub files: Vec<InputFile>,
    /// SHA-256 over the sorted `<hash> <path>\n` lines of `files`.
    pub tree_hash: String,
}

pub fn hash_inputs(cfg: &LoadedConfig) -> Result<Inputs> {
    let mut files = Vec::new();
    let config_name = cfg.path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let bytes = std::fs::read(&cfg.path).with_context(|| format!("hashing {}", cfg.path.display()))?;
    files.push(InputFile { path: config_name, hash: blob_hash(&bytes) });
    for rel in cfg.config.input_files() {
        let p = cfg.base_dir.join(&rel);
        let bytes = std::fs::read(&p).with_context(|| format!("hashing {}", p.display()))?;
        files.push(InputFile { path: rel, hash: blob_hash(&bytes) });
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let mut h = Sha256::new();
    for f in &files {
        h.update(format!("{} {}\n", f.hash, f.path).as_bytes());
    }
    Ok(Inputs { files, tree_hash: hex::encode(h.finalize()) })
}

/// SHA-256 of the configuration in canonical form (sorted keys, compact).
pub fn config_hash(raw: &serde_json::Value) -> String {
    let canonical = serde_json::to_vec(raw).expect("JSON values always serialize");
    hex::encode(Sha256::digest(&canonical))
}

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub experiment: Experiment,
    pub passed: bool,
    pub seed: u64,
    pub config_hash: String,
    pub inputs: Inputs,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunRecord {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(dir.join("report.json"), self).context("writing report.json")
    }
}
