use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Aborted { reason: String },
}

/// Run-level record written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub outcome: Outcome,
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        RunManifest {
            command: command.to_string(),
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: 0.0,
            outputs: Vec::new(),
            warnings: Vec::new(),
            outcome: Outcome::Completed,
        }
    }

    /// Writes `manifest.json` in `dir` via a temporary file and a rename.
    pub fn write(&mut self, dir: &Path) -> std::io::Result<()> {
        self.finished = now();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(&dir.join("manifest.json"), text.as_bytes())
    }

    pub fn read(dir: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
