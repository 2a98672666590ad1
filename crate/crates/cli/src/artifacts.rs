//! Plot-ready tables, the summary and the run manifest.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    /// Masked or not applicable; the reason lives in the sidecar.
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Empty
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::from)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Comma-separated table with a single header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, c) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    // Display of f64 never uses exponent notation.
                    Cell::Num(v) => write!(out, "{v}").expect("write to string"),
                    Cell::Text(s) if s.contains([',', '"', '\n']) => {
                        write!(out, "\"{}\"", s.replace('"', "\"\"")).expect("write to string")
                    }
                    Cell::Text(s) => out.push_str(s),
                    Cell::Empty => {}
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointState {
    Ok,
    Masked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStatus {
    pub index: usize,
    pub label: String,
    pub status: PointState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Results {
    pub tables: Vec<Table>,
    pub summary: serde_json::Map<String, serde_json::Value>,
    pub points: Vec<PointStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub points: Vec<PointStatus>,
    pub files: Vec<FileDigest>,
}

pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileDigest, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(FileDigest {
        name: name.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

/// Write tables and summary, then the manifest listing their digests. The
/// manifest is written last, so a failed run never leaves one behind.
pub fn emit_artifacts(
    results: &Results,
    config: &RunConfig,
    wall_time_s: f64,
    output_dir: &Path,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(output_dir).map_err(|e| CliError::io(output_dir, e))?;
    let mut files = Vec::with_capacity(results.tables.len() + 1);
    for t in &results.tables {
        files.push(write(output_dir, &t.file, t.to_csv().as_bytes())?);
    }
    let mut summary = serde_json::to_string_pretty(&results.summary).expect("summary serializes");
    summary.push('\n');
    files.push(write(output_dir, SUMMARY_FILE, summary.as_bytes())?);

    let manifest = RunManifest {
        config: config.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        wall_time_s,
        points: results.points.clone(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = output_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(manifest)
}
