use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

/// Run record written as `manifest.json` next to the artifacts.
pub struct Manifest {
    command: &'static str,
    config: Value,
    started: Instant,
    timings: BTreeMap<String, f64>,
    outputs: Vec<PathBuf>,
    results: serde_json::Map<String, Value>,
    last_mark: Instant,
}

impl Manifest {
    pub fn new(command: &'static str, config: &impl Serialize) -> Self {
        let now = Instant::now();
        Self {
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            started: now,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            results: serde_json::Map::new(),
            last_mark: now,
        }
    }

    /// Records the seconds since the previous mark under `phase`.
    pub fn mark(&mut self, phase: &str) {
        let now = Instant::now();
        self.timings
            .insert(phase.to_string(), (now - self.last_mark).as_secs_f64());
        self.last_mark = now;
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    /// Writes `manifest.json` into `dir`; `error` marks a failed run.
    pub fn write(mut self, dir: &Path, error: Option<&str>) -> std::io::Result<()> {
        self.timings
            .insert("total".into(), self.started.elapsed().as_secs_f64());
        let doc = json!({
            "tool": "gcn-ntk",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "status": if error.is_some() { "error" } else { "ok" },
            "error": error,
            "config": self.config,
            "results": self.results,
            "outputs": self.outputs,
            "timings_seconds": self.timings,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)
    }
}
