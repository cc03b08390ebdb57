//! Per-run provenance record written beside each command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fcnet::Result;
use serde::Serialize;

use crate::output::{FileDigest, Outputs};

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Config snapshot, seed, input and output digests, tool version and
/// wall-clock timings. Timings are the only nondeterministic content.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub arguments: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Vec<StageTiming>,
    /// Command-specific results.
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            arguments: std::env::args().skip(1).collect(),
            seed: None,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of_file(path)?);
        Ok(())
    }

    /// Runs `f` and records its wall-clock time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Records the digests of `outputs`, adds the manifest itself at `path`
    /// and commits everything.
    pub fn finish(mut self, mut outputs: Outputs, path: PathBuf) -> Result<()> {
        self.outputs = outputs.digests();
        let text = serde_json::to_string_pretty(&self)?;
        outputs.add(path, text);
        outputs.commit()
    }
}
