use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Record of one CLI invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    pub started_at_unix_ms: u128,
    pub finished_at_unix_ms: u128,
    pub artifacts: Vec<PathBuf>,
    /// Informational data excluded from determinism checks (timings).
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: &'static str, flags: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command,
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            seed,
            started_at_unix_ms: now_ms(),
            finished_at_unix_ms: 0,
            artifacts: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Stamp the end time and write to `path`.
    pub fn finish(mut self, path: &Path) -> CliResult<()> {
        self.finished_at_unix_ms = now_ms();
        let text = serde_json::to_string_pretty(&self).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::write(path, e))
    }
}

/// `<file>.manifest.json` beside a file output.
pub fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
