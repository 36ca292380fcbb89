//! Run manifests: enough to rebuild a run's inputs, plus where it put its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub version: String,
    /// effective configuration, with overrides applied and paths resolved
    pub config: serde_json::Value,
    /// git-style blob hash of the compact JSON of `config`
    pub config_hash: String,
    pub inputs: BTreeMap<String, InputFile>,
    /// output paths, relative to the manifest's directory
    pub checkpoints: Vec<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
    pub jsonl_log: Option<PathBuf>,
    pub outputs: BTreeMap<String, PathBuf>,
    pub wallclock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        let config_hash = config_hash(&config);
        RunManifest {
            run_id: format!("{command}-{}", &config_hash[..12]),
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            config_hash,
            inputs: BTreeMap::new(),
            checkpoints: Vec::new(),
            metrics_csv: None,
            jsonl_log: None,
            outputs: BTreeMap::new(),
            wallclock_seconds: 0.0,
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> io::Result<()> {
        let sha256 = file_sha256(path)?;
        self.inputs.insert(name.to_string(), InputFile { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    /// True when the stored hash still matches the stored snapshot.
    pub fn is_consistent(&self) -> bool {
        config_hash(&self.config) == self.config_hash
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(self)?)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over `blob <len>\0` followed by the bytes, as git computes object ids.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex(&h.finalize())
}

pub fn config_hash(config: &serde_json::Value) -> String {
    git_blob_hash(&serde_json::to_vec(config).expect("JSON values serialize"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
