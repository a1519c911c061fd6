use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Provenance written next to every run's outputs. Timestamps live only
/// here, so report payloads stay byte-identical across reruns.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    /// Input path -> SHA-256 of its contents (directories hash each file).
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub finished_at: String,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    started_at: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<PathBuf>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn start(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            argv: std::env::args().collect(),
            started_at: now(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    /// Records the content hash of `path`, or of every file below it.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("listing {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            entries.sort();
            for e in entries {
                self.input(&e)?;
            }
        } else {
            let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            self.inputs
                .insert(path.display().to_string(), groundcheck::content_hash(&bytes));
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(self, config: &RunConfig, dir: &Path) -> Result<PathBuf> {
        let manifest = Manifest {
            tool: "groundcheck",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command.clone(),
            argv: self.argv,
            config: config.clone(),
            inputs: self.inputs,
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            started_at: self.started_at,
            finished_at: now(),
        };
        let path = dir.join(format!("{}.manifest.json", self.command));
        groundcheck::write_atomic(&path, &serde_json::to_vec_pretty(&manifest)?)?;
        Ok(path)
    }
}
