use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{CliResult, ErrorClass};

/// `p` taken relative to the directory holding `config`, unless absolute.
pub fn resolve(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() || p.as_os_str().is_empty() {
        return p.to_path_buf();
    }
    config.parent().unwrap_or(Path::new(".")).join(p)
}

/// Reads a JSON config; both unreadable and malformed files are config errors.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).or_config(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).or_config(|| format!("malformed config {}", path.display()))
}

/// Absolute form of a path that may not exist yet.
pub fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}
