//! Schema-stable CSV tables.
//!
//! Floating-point cells use Rust's shortest round-trip formatting, so a rerun
//! with the same seed produces byte-identical files.

use std::path::Path;

use crate::CliError;

#[derive(Debug)]
pub struct Table {
    name: &'static str,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Self { name, header, rows: Vec::new() }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn rows(&self) -> u64 {
        self.rows.len() as u64
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }

    /// Write `<dir>/<name>.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, out)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
    }
}

/// Format a float cell.
pub fn cell(x: f64) -> String {
    format!("{x}")
}
