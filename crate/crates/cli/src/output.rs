//! Atomic output files and their run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Writes `contents` to a temporary file beside `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: u64,
    pub tool_version: &'static str,
    pub duration_secs: f64,
}

/// Collects a command's outputs and writes each with a manifest once all succeed.
pub struct Outputs {
    command: String,
    seed: u64,
    started: Instant,
    inputs: Vec<PathBuf>,
    pending: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn new(command: &str, seed: u64) -> Self {
        Self { command: command.into(), seed, started: Instant::now(), inputs: Vec::new(), pending: Vec::new() }
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    pub fn add(&mut self, path: PathBuf, contents: impl Into<Vec<u8>>) {
        self.pending.push((path, contents.into()));
    }

    /// Writes every output, then one manifest per output.
    pub fn commit(self, config: &impl Serialize) -> Result<Vec<PathBuf>> {
        let outputs: Vec<PathBuf> = self.pending.iter().map(|(p, _)| p.clone()).collect();
        for (path, contents) in &self.pending {
            write_atomic(path, contents)?;
        }
        let manifest = RunManifest {
            command: self.command,
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            outputs: outputs.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        for path in &outputs {
            write_atomic(&manifest_path(path), text.as_bytes())?;
        }
        Ok(outputs)
    }
}
