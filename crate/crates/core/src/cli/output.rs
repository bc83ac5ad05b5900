use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// Decimal text with at most 12 significant fractional digits and no
/// trailing zeros, so `1.2500000000000002` prints as `1.25`.
pub fn trim_number(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Shortest round-trip text, in exponent form outside `[1e−4, 1e15)`.
pub fn number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Column-oriented table written as CSV; an empty table is a header line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| number(v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let wrap = |e: csv::Error| Error::Format {
            what: "table".into(),
            detail: e.to_string(),
        };
        w.write_record(&self.header).map_err(wrap)?;
        for r in &self.rows {
            w.write_record(r).map_err(wrap)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format {
            what: "table".into(),
            detail: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Files written by one run, in order.
#[derive(Debug, Default)]
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: vec![],
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    pub fn write_text(&mut self, name: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text)?;
        Ok(self.record(path))
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<PathBuf> {
        self.write_text(name, &table.to_csv()?)
    }

    pub fn write_json<T: Serialize>(&mut self, name: impl AsRef<Path>, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Register a file written by other means.
    pub fn add(&mut self, path: PathBuf) -> PathBuf {
        self.record(path)
    }

    /// Names relative to the output directory.
    pub fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .map(|p| p.strip_prefix(&self.dir).unwrap_or(p).display().to_string())
            .collect()
    }
}

/// Write `manifest.json`: the config, the field document, tolerances, outputs,
/// outcome, tool version and a timestamp.
pub fn write_manifest(artifacts: &Artifacts, config: &ExperimentConfig, spec: Option<&Value>, tolerances: &Value, summary: &Value, passed: bool) -> Result<PathBuf> {
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.params.name(),
        "config": config,
        "spec": spec,
        "seed": config.seed,
        "tolerances": tolerances,
        "outputs": artifacts.names(),
        "passed": passed,
        "summary": summary,
        "timestamp_unix": timestamp,
    });
    let path = artifacts.path("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}
