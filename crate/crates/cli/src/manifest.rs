//! Run manifests: one JSON record per command invocation.

use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub seed: Option<u64>,
    /// FNV-1a 64 of the effective configuration, hex encoded.
    pub config_digest: Option<String>,
    pub duration_s: f64,
    pub version: String,
    pub model_format_version: u16,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
            config_digest: None,
            duration_s: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
            model_format_version: pyrf::forest::FORMAT_VERSION,
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config_digest(mut self, bytes: &[u8]) -> Self {
        self.config_digest = Some(format!("{:016x}", pyrf::rng::fnv1a64(bytes)));
        self
    }

    /// Write to `<primary_out>.manifest.json`.
    pub fn write(mut self, primary_out: &Path, started: std::time::Instant) -> std::io::Result<()> {
        self.duration_s = started.elapsed().as_secs_f64();
        let path = manifest_path(primary_out);
        std::fs::write(path, serde_json::to_string_pretty(&self).expect("manifest serializes"))
    }
}

pub fn manifest_path(primary_out: &Path) -> PathBuf {
    let mut name = primary_out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    primary_out.with_file_name(name)
}
