//! On-disk cache of gap-probability curves.
//!
//! One JSON file per curve, named by [`GapCurve::cache_key`]. Floats are
//! written with round-trip precision, so a hit returns exactly the bits that
//! were computed. Writes go to a temporary file that is renamed into place,
//! which keeps concurrent readers from ever seeing a partial file; writers in
//! one process are additionally serialized.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm::{curve_cache_key, source_gap_curve, CurveSource, GapCurve, Grid};
use crate::rng::substream;

/// Environment variable overriding the cache location.
pub const CACHE_DIR_ENV: &str = "SPECTRAL_CACHE_DIR";
/// Fraction of tabulated points recomputed by [`CurveCache::verify`].
pub const VERIFY_FRACTION: f64 = 0.01;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

#[derive(Debug)]
pub struct CurveCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

/// Summary of one cached curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub source: String,
    pub m: usize,
    pub points: usize,
    pub s_max: f64,
    pub bytes: u64,
}

/// Outcome of [`CurveCache::verify`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub curves: usize,
    pub points_checked: usize,
    /// Keys whose recomputed values differ from the stored bits.
    pub mismatched: Vec<String>,
    /// Keys whose files cannot be read or do not match their key.
    pub corrupt: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty() && self.corrupt.is_empty()
    }
}

impl CurveCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CurveCache {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    /// `$SPECTRAL_CACHE_DIR`, else `$HOME/.cache/rmt-spacing`, else
    /// `.spectral-cache` in the working directory.
    pub fn from_env() -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV)
            .map(PathBuf::from)
            .or_else(|| std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache").join("rmt-spacing")))
            .unwrap_or_else(|| PathBuf::from(".spectral-cache"));
        CurveCache::new(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    fn cache_err(&self, path: &Path, reason: impl std::fmt::Display) -> Error {
        Error::Cache {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        }
    }

    fn read(&self, path: &Path) -> Result<GapCurve> {
        let text = fs::read_to_string(path).map_err(|e| self.cache_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| self.cache_err(path, e))
    }

    pub fn get(&self, key: &str) -> Result<Option<GapCurve>> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        self.read(&path).map(Some)
    }

    pub fn put(&self, curve: &GapCurve) -> Result<PathBuf> {
        let key = curve.cache_key();
        let path = self.path(&key);
        let json = serde_json::to_string(curve).map_err(|e| self.cache_err(&path, e))?;
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        fs::create_dir_all(&self.dir).map_err(|e| self.cache_err(&self.dir, e))?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, json).map_err(|e| self.cache_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| self.cache_err(&path, e))?;
        Ok(path)
    }

    /// Cached curve for `(source, grid, m)`, computing and storing it on a
    /// miss. The flag is true for a hit.
    pub fn gap_curve(&self, source: &CurveSource, grid: &Grid, m: usize) -> Result<(GapCurve, bool)> {
        let key = curve_cache_key(source, m, grid);
        if let Some(curve) = self.get(&key)? {
            return Ok((curve, true));
        }
        let curve = source_gap_curve(source, grid, m)?;
        self.put(&curve)?;
        Ok((curve, false))
    }

    fn files(&self) -> Result<Vec<PathBuf>> {
        if !self.dir.exists() {
            return Ok(Vec::new());
        }
        let mut out: Vec<PathBuf> = fs::read_dir(&self.dir)
            .map_err(|e| self.cache_err(&self.dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        out.sort();
        Ok(out)
    }

    fn key_of(path: &Path) -> String {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    }

    /// Readable entries; unreadable files are skipped here and reported by
    /// [`CurveCache::verify`].
    pub fn list(&self) -> Result<Vec<CacheEntry>> {
        Ok(self
            .files()?
            .into_iter()
            .filter_map(|p| {
                let curve = self.read(&p).ok()?;
                Some(CacheEntry {
                    key: Self::key_of(&p),
                    source: curve.source.to_string(),
                    m: curve.m,
                    points: curve.grid.len(),
                    s_max: curve.grid.s_max(),
                    bytes: fs::metadata(&p).map(|m| m.len()).unwrap_or(0),
                })
            })
            .collect())
    }

    /// Remove every cached curve; returns how many files were deleted.
    pub fn clear(&self) -> Result<usize> {
        let _guard = self.write_lock.lock().unwrap_or_else(|p| p.into_inner());
        let files = self.files()?;
        for f in &files {
            fs::remove_file(f).map_err(|e| self.cache_err(f, e))?;
        }
        Ok(files.len())
    }

    /// Recompute a random `VERIFY_FRACTION` (at least one) of each curve's
    /// points, chosen reproducibly from `seed`, and compare bit patterns.
    pub fn verify(&self, seed: u64) -> Result<VerifyReport> {
        let mut report = VerifyReport::default();
        for (n, path) in self.files()?.into_iter().enumerate() {
            let key = Self::key_of(&path);
            report.curves += 1;
            let curve = match self.read(&path) {
                Ok(c) if c.cache_key() == key && c.values.len() == c.grid.len() => c,
                _ => {
                    report.corrupt.push(key);
                    continue;
                }
            };
            let len = curve.grid.len();
            let count = ((len as f64 * VERIFY_FRACTION).ceil() as usize).clamp(1, len);
            let mut rng = substream(seed, n as u64);
            let mut indices = sample(&mut rng, len, count).into_vec();
            indices.sort_unstable();
            let fresh = curve.recompute(&indices)?;
            report.points_checked += indices.len();
            let same = indices
                .iter()
                .zip(&fresh)
                .all(|(&i, v)| v.to_bits() == curve.values[i].to_bits());
            if !same {
                report.mismatched.push(key);
            }
        }
        Ok(report)
    }
}
