//! Artifact emission. Every file goes through one [`Writer`], which records
//! its SHA-256 digest for the run manifest.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

/// Number formatting for CSV cells: 17 significant digits, locale independent.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub timestamp: Option<String>,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
}

pub struct Writer {
    dir: PathBuf,
    entries: Vec<FileEntry>,
    names: BTreeSet<String>,
    timestamp: Option<String>,
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl Writer {
    pub fn create(dir: &Path, timestamp: Option<String>) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
            names: BTreeSet::new(),
            timestamp,
        })
    }

    pub fn timestamp(&self) -> Option<&str> {
        self.timestamp.as_deref()
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        if name == MANIFEST || !self.names.insert(name.to_string()) {
            return Err(CliError::Internal(format!(
                "artifact '{name}' emitted twice"
            )));
        }
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        self.entries.push(FileEntry {
            path: name.to_string(),
            sha256: digest(contents),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    /// CSV with a header row; `rows` are already formatted cells.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn entries(&self) -> &[FileEntry] {
        &self.entries
    }

    /// Write `manifest.json` and return it.
    pub fn finish(self, config: &RunConfig) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            tool: "fraclab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: self.timestamp,
            config: serde_json::to_value(config)
                .map_err(|e| CliError::Internal(format!("serializing config: {e}")))?,
            files: self.entries,
        };
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Internal(format!("serializing manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(manifest)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<RunManifest>, CliError> {
    let path = dir.join(MANIFEST);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Internal(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_error(&path, e)),
    }
}

/// Differences between a previous manifest and a fresh one, one line each.
pub fn drift(previous: &RunManifest, current: &RunManifest) -> Vec<String> {
    let mut out = Vec::new();
    for old in &previous.files {
        match current.files.iter().find(|f| f.path == old.path) {
            None => out.push(format!("missing: {}", old.path)),
            Some(new) if new.sha256 != old.sha256 => out.push(format!(
                "changed: {} ({} -> {})",
                old.path, old.sha256, new.sha256
            )),
            Some(_) => {}
        }
    }
    for new in &current.files {
        if !previous.files.iter().any(|f| f.path == new.path) {
            out.push(format!("new: {}", new.path));
        }
    }
    out
}
