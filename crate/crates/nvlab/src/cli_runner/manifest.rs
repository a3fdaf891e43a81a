use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{NvError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub threads: usize,
    pub wall_time_s: f64,
    pub failures: usize,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, argv: Vec<String>, config: RunConfig, threads: usize) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            argv,
            config,
            threads,
            wall_time_s: 0.0,
            failures: 0,
            outputs: Vec::new(),
            summary: serde_json::Value::Null,
        }
    }

    /// `<stem>.manifest.json` next to the first output.
    pub fn path_for(output: &Path) -> PathBuf {
        let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        output.with_file_name(format!("{stem}.manifest.json"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        for o in &self.outputs {
            if !o.exists() {
                return Err(NvError::Config(format!("output {} is missing", o.display())));
            }
        }
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, text).map_err(|e| NvError::Config(format!("cannot write {}: {e}", path.display())))
    }
}
