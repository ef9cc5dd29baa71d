//! Run manifests: one TOML file per run directory recording what was run,
//! with which seeds, and the hash of every artifact produced.
//!
//! Manifests are byte-deterministic: streams and artifacts are sorted, the
//! full config is embedded verbatim, and floats use shortest round-trip
//! formatting. Two runs with the same config and master seed write identical
//! manifests.

use crate::seeding::StreamRecord;
use crate::HarnessError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Which pipeline wrote this directory: "simulate", "fit", "rate-study".
    pub kind: String,
    pub master_seed: u64,
    /// Window volume, for single-n runs. Equals the window grid volume.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate: Option<u64>,
    pub config_sha256: String,
    /// The full configuration, embedded for auditability.
    pub config_toml: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub streams: Vec<StreamRecord>,
}

impl RunManifest {
    pub fn new(kind: &str, master_seed: u64, config_toml: String) -> Self {
        RunManifest {
            kind: kind.to_string(),
            master_seed,
            n: None,
            volume: None,
            replicate: None,
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config_toml,
            artifacts: Vec::new(),
            streams: Vec::new(),
        }
    }

    /// Hash `path` and add it to the artifact list under its file name.
    pub fn record_artifact(&mut self, path: &Path) -> Result<(), HarnessError> {
        let name = path
            .file_name()
            .ok_or_else(|| {
                HarnessError::Runtime(format!("artifact {} has no name", path.display()))
            })?
            .to_string_lossy()
            .to_string();
        self.artifacts.push(ArtifactRecord {
            file: name,
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn write(mut self, dir: &Path) -> Result<std::path::PathBuf, HarnessError> {
        self.artifacts.sort();
        self.streams.sort();
        let text = toml::to_string(&self)
            .map_err(|e| HarnessError::Runtime(format!("manifest serialization: {e}")))?;
        let path = dir.join("manifest.toml");
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_hex(&bytes))
}
