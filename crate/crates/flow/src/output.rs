//! CSV tables, check records and the run manifest. Every file is written
//! to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::Result;

pub use ginibre_core::estimators::fmt_f64 as fmt;

/// A CSV file assembled in memory.
#[derive(Clone, Debug)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One measured-versus-expected comparison.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|measured - expected| < tolerance`.
    pub fn near(name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected,
            tolerance,
            passed: (measured - expected).abs() < tolerance,
        }
    }

    /// `measured < limit`.
    pub fn below(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: 0.0,
            tolerance: limit,
            passed: measured < limit,
        }
    }

    /// `lo <= measured <= hi`, reported as center and half-width.
    pub fn between(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            expected: 0.5 * (lo + hi),
            tolerance: 0.5 * (hi - lo),
            passed: measured >= lo && measured <= hi,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedRecord {
    pub tau: f64,
    pub master_seed: u64,
    pub stream_seed: u64,
    pub sample_indices: [usize; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub rows: usize,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub code_version: String,
    pub config: ExperimentConfig,
    pub wall_time_seconds: f64,
    pub worker_threads: usize,
    pub summary: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub rng_lineage: Vec<SeedRecord>,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Collects tables and writes them under one directory.
pub struct Sink {
    dir: PathBuf,
    pub files: Vec<FileRecord>,
}

impl Sink {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, table: &Table) -> Result<()> {
        let bytes = table.to_bytes()?;
        write_atomic(&self.dir.join(name), &bytes)?;
        self.files.push(FileRecord {
            path: name.to_string(),
            rows: table.len(),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        write_atomic(&self.dir.join(name), &bytes)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
