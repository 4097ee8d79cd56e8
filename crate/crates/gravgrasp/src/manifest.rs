//! Per-run provenance: config hash, stage timings and file digests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsutil::{read, sha256_hex, write_json};
use crate::pipeline::TOOLKIT_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub toolkit_version: String,
    /// Wall time per stage [s].
    pub timings: BTreeMap<String, f64>,
    /// SHA-256 of every file read, keyed by path.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every file written, keyed by path relative to the
    /// manifest when possible.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            command: command.into(),
            config_hash,
            toolkit_version: TOOLKIT_VERSION.into(),
            timings: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(stage.into()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_hex(&read(path)?));
        Ok(())
    }

    pub fn add_output(&mut self, root: &Path, path: &Path) -> Result<()> {
        let key = path.strip_prefix(root).unwrap_or(path).display().to_string();
        self.outputs.insert(key, sha256_hex(&read(path)?));
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    /// Output paths whose current content no longer matches the digest.
    pub fn stale_outputs(&self, root: &Path) -> Vec<PathBuf> {
        self.outputs
            .iter()
            .filter_map(|(k, digest)| {
                let p = root.join(k);
                match read(&p) {
                    Ok(b) if sha256_hex(&b) == *digest => None,
                    _ => Some(p),
                }
            })
            .collect()
    }
}
