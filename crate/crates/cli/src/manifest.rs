//! `manifest.json` written next to every command's outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliResult;
use crate::sweep::write_text;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub seed: u64,
    /// Full resolved settings. Thread count is left out on purpose: outputs
    /// do not depend on it.
    pub config: Value,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            core_version: credal_core::VERSION,
            command: command.into(),
            seed,
            config,
        }
    }

    /// Writes `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        self.write_as(&dir.join("manifest.json"))
    }

    pub fn write_as(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_text(path, &(text + "\n"))
    }
}

/// Manifest path for a single output file: `report.json` gets
/// `report.manifest.json` next to it.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.manifest.json"))
}
