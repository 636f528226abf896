//! `run-manifest-<command>.json`: what a command was run with and what it
//! read and wrote, with SHA-256 checksums.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::io::{sha256_file, write_atomic};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    /// Requested worker threads; 0 means one per core.
    pub threads: usize,
    pub config: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
}

fn artifact(path: &Path, base: Option<&Path>) -> Result<Artifact> {
    let shown = base.and_then(|b| path.strip_prefix(b).ok()).unwrap_or(path);
    Ok(Artifact { path: shown.display().to_string(), sha256: sha256_file(path)? })
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, threads: usize, config: impl Serialize) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed,
            threads,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Output paths are recorded relative to `out_dir`, so reruns into
    /// different directories give the same manifest.
    pub fn write(mut self, out_dir: &Path, inputs: &[&Path], outputs: &[PathBuf]) -> Result<PathBuf> {
        self.inputs = inputs.iter().map(|p| artifact(p, None)).collect::<Result<_>>()?;
        self.outputs = outputs.iter().map(|p| artifact(p, Some(out_dir))).collect::<Result<_>>()?;
        let path = out_dir.join(format!("run-manifest-{}.json", self.command.replace(' ', "-")));
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
