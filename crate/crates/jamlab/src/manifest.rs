//! Run manifests: what was run, on which data, and which files it produced.

use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use jamlab_core::data::Dataset;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::io::{dataset_to_bytes, read_bytes, write_json};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// SHA-256 over canonical JSON (object keys sorted).
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let v = serde_json::to_value(config).expect("serializable");
    sha256_hex(&serde_json::to_vec(&v).expect("serializable"))
}

/// Git-style blob hash (`blob <len>\0` framing, SHA-256) of the binary
/// dataset encoding.
pub fn dataset_hash(data: &Dataset) -> String {
    blob_hash(&dataset_to_bytes(data))
}

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()));
    h.update(bytes);
    hex(&h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: Uuid,
    /// `train`, `sweep`, `spectrum`, ...
    pub kind: String,
    pub config_hash: String,
    /// The configuration that produced the outputs, replayable as is.
    pub config: serde_json::Value,
    #[serde(default)]
    pub dataset_hashes: Vec<String>,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputFile>,
    pub software_version: String,
    /// Wall-clock seconds per unit of work (runs, cells), kept out of the
    /// result files so those stay byte-reproducible.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runtimes: Vec<f64>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects outputs while a run executes; [`ManifestBuilder::finish`]
/// hashes them and writes `manifest.json` into `dir`.
pub struct ManifestBuilder {
    dir: PathBuf,
    kind: String,
    config: serde_json::Value,
    started: DateTime<Utc>,
    datasets: Vec<String>,
    outputs: Vec<PathBuf>,
    runtimes: Vec<f64>,
}

impl ManifestBuilder {
    pub fn new<T: Serialize>(dir: &Path, kind: &str, config: &T) -> Self {
        Self {
            dir: dir.to_path_buf(),
            kind: kind.into(),
            config: serde_json::to_value(config).expect("serializable"),
            started: Utc::now(),
            datasets: Vec::new(),
            outputs: Vec::new(),
            runtimes: Vec::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn dataset(&mut self, data: &Dataset) {
        self.datasets.push(dataset_hash(data));
    }

    /// Registers a file already written under the manifest directory.
    pub fn output(&mut self, rel: impl Into<PathBuf>) {
        self.outputs.push(rel.into());
    }

    pub fn runtime(&mut self, seconds: f64) {
        self.runtimes.push(seconds);
    }

    pub fn finish(self) -> Result<RunManifest> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for rel in self.outputs {
            let bytes = read_bytes(&self.dir.join(&rel))?;
            outputs.push(OutputFile { path: rel, sha256: sha256_hex(&bytes) });
        }
        let m = RunManifest {
            run_id: Uuid::new_v4(),
            kind: self.kind,
            config_hash: config_hash(&self.config),
            config: self.config,
            dataset_hashes: self.datasets,
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            outputs,
            software_version: env!("CARGO_PKG_VERSION").into(),
            runtimes: self.runtimes,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }
}

pub fn load_manifest(path: &Path) -> Result<RunManifest> {
    crate::config::read_json(path)
}

/// Re-hashes every listed output next to the manifest at `path`.
pub fn verify(path: &Path) -> Result<RunManifest> {
    let m = load_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    if m.outputs.is_empty() {
        return Err(Error::Verify(format!("{} lists no outputs", path.display())));
    }
    for o in &m.outputs {
        let got = sha256_hex(&read_bytes(&dir.join(&o.path))?);
        if got != o.sha256 {
            return Err(Error::Verify(format!("{} changed since {}", o.path.display(), path.display())));
        }
    }
    Ok(m)
}
