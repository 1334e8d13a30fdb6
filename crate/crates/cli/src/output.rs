//! CSV files with a `#`-prefixed JSON header line, JSON sidecars and run
//! manifests.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// A numeric table plus its metadata header.
#[derive(Debug, Clone)]
pub struct Table {
    pub meta: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(meta: Value, columns: &[&str]) -> Self {
        Table {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Numbers use the shortest round-trip representation, so identical
    /// values always produce identical bytes.
    pub fn render(&self) -> String {
        let mut out = format!("# {}\n{}\n", self.meta, self.columns.join(","));
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                first = false;
                write!(out, "{v}").expect("writing to a String");
            }
            out.push('\n');
        }
        out
    }
}

/// Write `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(path, &text)
}

/// Columns of a CSV written by this tool (or any CSV with a header row);
/// `#` lines are skipped.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), n + 1))?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: non-numeric value in row {}", path.display(), n + 1))?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn column(rows: &[Vec<f64>], k: usize) -> Vec<f64> {
    rows.iter().filter_map(|r| r.get(k).copied()).collect()
}

/// `out.csv` -> `out.csv.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}

/// Everything needed to rerun a command and get the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: Value,
    pub seed: Option<u64>,
    pub cache_keys: Vec<String>,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
}

/// Collects manifest fields while a command runs.
#[derive(Debug)]
pub struct ManifestBuilder {
    command_line: Vec<String>,
    config: Value,
    start: Instant,
    seed: Mutex<Option<u64>>,
    cache_keys: Mutex<Vec<String>>,
}

impl ManifestBuilder {
    pub fn new(command_line: Vec<String>, config: Value) -> Self {
        ManifestBuilder {
            command_line,
            config,
            start: Instant::now(),
            seed: Mutex::new(None),
            cache_keys: Mutex::new(Vec::new()),
        }
    }

    pub fn set_seed(&self, seed: u64) {
        *self.seed.lock().unwrap_or_else(|p| p.into_inner()) = Some(seed);
    }

    pub fn touch(&self, key: impl Into<String>) {
        let key = key.into();
        let mut keys = self.cache_keys.lock().unwrap_or_else(|p| p.into_inner());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }

    pub fn cache_keys(&self) -> Vec<String> {
        self.cache_keys.lock().unwrap_or_else(|p| p.into_inner()).clone()
    }

    pub fn finish(&self, outputs: Vec<PathBuf>) -> RunManifest {
        RunManifest {
            command_line: self.command_line.clone(),
            config: self.config.clone(),
            seed: *self.seed.lock().unwrap_or_else(|p| p.into_inner()),
            cache_keys: self.cache_keys(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            outputs,
        }
    }

    /// Write the manifest next to `primary` (as `<primary>.manifest.json`).
    pub fn write_beside(&self, primary: &Path, outputs: Vec<PathBuf>) -> Result<PathBuf> {
        let path = sidecar(primary, "manifest.json");
        emit_json(Some(&path), &self.finish(outputs))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trips_through_csv_reader() {
        let mut t = Table::new(serde_json::json!({"m": 200}), &["s", "P"]);
        t.push(vec![0.0, 0.0]);
        t.push(vec![0.01, 1.0 / 3.0]);
        let text = t.render();
        assert!(text.starts_with("# {\"m\":200}\ns,P\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit(Some(&path), &text).unwrap();
        let (header, rows) = read_table(&path).unwrap();
        assert_eq!(header, vec!["s", "P"]);
        assert_eq!(rows[1][1], 1.0 / 3.0);
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("a/b.csv"), "json"), PathBuf::from("a/b.csv.json"));
    }
}
