//! Reports and CSV tables.

use crate::config::RunConfig;
use crate::error::CliError;
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

/// Bumped whenever a field of any report changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub pass: bool,
    pub result: Value,
}

/// A CSV table: a header row and string-formatted records.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        self.rows.push(row.into_iter().collect());
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// What a command produced, before it is rendered.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub tables: Vec<Table>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn new(pass: bool, result: Value, summary: Vec<String>) -> Self {
        Self { pass, result, tables: Vec::new(), summary }
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

/// Writes `<command>.json`, the resolved `config.toml` and one CSV per table into `dir`.
pub fn write_artifacts(dir: &Path, report: &Report, tables: &[Table]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), report.config.to_toml_string())?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(dir.join(format!("{}.json", report.command)), json)?;
    for t in tables {
        std::fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?)?;
    }
    Ok(())
}

/// `f64` rendered for CSV with full round-trip precision.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
