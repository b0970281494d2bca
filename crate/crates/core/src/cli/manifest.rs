//! Run manifests: what was run, with which configuration, on which inputs,
//! producing which outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    /// SHA-256 of the effective configuration as compact JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path)?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, seed: u64, started_unix: u64) -> Result<Self> {
        let value = serde_json::to_value(config)?;
        let compact = serde_json::to_vec(&value)?;
        Ok(RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: sha256_hex(&compact),
            config: value,
            seed,
            started_unix,
            finished_unix: started_unix,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Digests inputs and outputs, stamps the finish time and writes
    /// `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<PathBuf> {
        self.inputs = inputs.iter().map(|p| file_digest(p)).collect::<Result<_>>()?;
        self.outputs = outputs.iter().map(|p| file_digest(p)).collect::<Result<_>>()?;
        self.finished_unix = unix_now();
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, &self)?;
        Ok(path)
    }
}
