//! Run manifests and output-directory handling.
//!
//! A manifest is written last, through a temporary file and a rename, so a
//! failed run never leaves one behind.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const MANIFEST_NAME: &str = "manifest.json";

/// An output directory with any stale manifest removed.
pub struct RunDir {
    root: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root)?;
        remove_stale(root)?;
        Ok(RunDir { root: root.to_owned(), outputs: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Note a file written by other means.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_owned());
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
        self.record(name);
        Ok(())
    }

    pub fn finish(self, command: &str, config: Value, inputs: Value, results: Value) -> CliResult<()> {
        let manifest = json!({
            "tool": "dehaze-adv",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "inputs": inputs,
            "outputs": self.outputs,
            "results": results,
        });
        write_atomic(&self.root.join(MANIFEST_NAME), &(serde_json::to_string_pretty(&manifest)? + "\n"))
    }
}

/// Drop a manifest left by an earlier run in `root`, if any.
pub fn remove_stale(root: &Path) -> CliResult<()> {
    match fs::remove_file(root.join(MANIFEST_NAME)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

pub fn read_manifest(run: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(run.join(MANIFEST_NAME))
        .map_err(|e| crate::error::CliError::usage(format!("{} is not a finished run: {e}", run.display())))?;
    Ok(serde_json::from_str(&text)?)
}
