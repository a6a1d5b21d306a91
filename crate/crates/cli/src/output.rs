//! In-memory output tree, written in one go together with its manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::inputs::InputDigest;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Default)]
pub struct OutputTree {
    files: BTreeMap<PathBuf, Vec<u8>>,
}

impl OutputTree {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(rel.into(), bytes);
    }

    pub fn add_json<T: Serialize>(&mut self, rel: impl Into<PathBuf>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.add(rel, bytes);
    }

    /// Builds a CSV file through a writer callback.
    pub fn add_with<F>(&mut self, rel: impl Into<PathBuf>, f: F)
    where
        F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf).expect("writing to memory cannot fail");
        self.add(rel, buf);
    }

    pub fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.files.keys()
    }

    /// Writes every file below `root`, then `manifest.json`.
    pub fn write(self, root: &Path, mut manifest: RunManifest) -> Result<()> {
        manifest.outputs = self
            .files
            .keys()
            .map(|p| p.to_string_lossy().replace('\\', "/"))
            .collect();
        for (rel, bytes) in &self.files {
            let path = root.join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        }
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        let path = root.join(MANIFEST_NAME);
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }
}

/// Provenance of one run. Wall-clock time and thread count are left out so
/// that reruns produce identical trees.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new<C: Serialize>(subcommand: &'static str, config: &C, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: "polarlens",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config: serde_json::to_value(config).expect("serializable config"),
            inputs,
            seeds: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }
}
