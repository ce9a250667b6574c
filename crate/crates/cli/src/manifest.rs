//! Per-run provenance record written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDigest {
    /// Output file path, or `-` for standard output.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub library_version: String,
    pub seed: Option<u64>,
    pub threads: usize,
    /// Effective configuration after flags were applied.
    pub config: serde_json::Value,
    pub duration_secs: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, threads: usize, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            config: serde_json::to_value(config).map_err(|e| CliError::input(e.to_string()))?,
            duration_secs: 0.0,
            outputs: Vec::new(),
        })
    }

    pub fn record_file(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.record_bytes(&path.display().to_string(), &bytes);
        Ok(())
    }

    pub fn record_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.outputs.push(OutputDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    pub fn finish(&mut self, elapsed: Duration) {
        self.duration_secs = elapsed.as_secs_f64();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::input(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `plan.csv` → `plan.csv.manifest.json`.
pub fn default_manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
