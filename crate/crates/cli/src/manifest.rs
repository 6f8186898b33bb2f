use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use kslab::io::write_json;
use kslab::Result;

/// Written last, so every listed output exists when it does. The
/// wall-clock time is the only field that varies between identical runs.
#[derive(Debug, Serialize)]
pub struct ExperimentManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub status: String,
    pub wall_clock_seconds: f64,
}

pub struct Recorder {
    command: &'static str,
    started: Instant,
    outputs: Vec<String>,
}

impl Recorder {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            outputs: Vec::new(),
        }
    }

    pub fn output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn finish(self, dir: &Path, seed: Option<u64>, config: Value, status: &str) -> Result<()> {
        let m = ExperimentManifest {
            tool: "kslab",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed,
            config,
            outputs: self.outputs,
            status: status.to_string(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        write_json(dir.join("manifest.json"), &m)
    }
}
