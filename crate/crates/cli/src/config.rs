//! Flat key=value config files. Precedence is flags > file > defaults; the
//! resolved configuration is echoed into the run manifest.

use crate::{CliError, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    entries: BTreeMap<String, String>,
}

pub fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("--config {}: {e}", path.display()))
    })?;
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "--config {}:{}: expected key=value, got '{line}'",
                path.display(),
                lineno + 1
            )));
        };
        entries.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(FileConfig { entries })
}

impl FileConfig {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

/// Flag value if present, else parsed config-file value.
pub fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
) -> Result<Option<T>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            CliError::Config(format!("config key '{key}': cannot parse '{raw}'"))
        }),
    }
}

pub fn pick_str(flag: Option<String>, file: &FileConfig, key: &str) -> Result<Option<String>> {
    Ok(flag.or_else(|| file.get(key).map(|s| s.to_string())))
}

pub fn pick_path(flag: Option<PathBuf>, file: &FileConfig, key: &str) -> Result<Option<PathBuf>> {
    Ok(flag.or_else(|| file.get(key).map(PathBuf::from)))
}

/// Boolean config key (flags themselves are handled by clap).
pub fn pick_flag(file: &FileConfig, key: &str) -> Result<bool> {
    match file.get(key) {
        None => Ok(false),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(other) => Err(CliError::Config(format!(
            "config key '{key}': expected true/false, got '{other}'"
        ))),
    }
}
