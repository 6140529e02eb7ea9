//! The run manifest: one JSON summary written atomically per run.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact_version: &'static str,
    pub experiment: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    /// Row counts per written table.
    pub tables: BTreeMap<String, u64>,
    /// Paths rejected by the inversion guard across all tables.
    pub singular: u64,
    /// Whether every declared acceptance check passed.
    pub criteria_passed: bool,
}

impl RunManifest {
    /// Serialize to `<dir>/manifest.json` via a temporary file and a rename,
    /// so a crash never leaves a half-written manifest behind.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let body = serde_json::to_vec_pretty(self).expect("manifest serializes");
        let tmp = dir.join("manifest.json.tmp");
        let target = dir.join("manifest.json");
        std::fs::write(&tmp, body)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
        std::fs::rename(&tmp, &target)
            .map_err(|e| CliError::Io(format!("renaming {}: {e}", target.display())))?;
        Ok(())
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339()
}
