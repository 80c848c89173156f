//! JSON-lines cache of computed period points.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PeriodPoint;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub fibration: String,
    pub y: Complex64,
    pub pi1: Complex64,
    pub pi2: Complex64,
    pub path_id: String,
    pub residuals: Residuals,
}

impl CacheRecord {
    pub fn point(&self) -> PeriodPoint {
        PeriodPoint::new(self.y, self.pi1, self.pi2, self.path_id.clone())
    }
}

fn key(fibration: &str, y: Complex64, path_id: &str) -> String {
    format!(
        "{fibration}|{:016x}{:016x}|{path_id}",
        y.re.to_bits(),
        y.im.to_bits()
    )
}

/// In-memory map backed by an optional file; records are written sorted so
/// the file content depends only on the set of records.
#[derive(Debug, Default)]
pub struct PeriodCache {
    file: Option<PathBuf>,
    records: BTreeMap<String, CacheRecord>,
    hits: usize,
    misses: usize,
}

impl PeriodCache {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut cache = PeriodCache {
            file: Some(path.clone()),
            ..Default::default()
        };
        if path.exists() {
            let f = fs::File::open(&path)?;
            for line in BufReader::new(f).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)?;
                cache.insert(rec);
            }
        }
        Ok(cache)
    }

    pub fn is_enabled(&self) -> bool {
        self.file.is_some()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn get(&mut self, fibration: &str, y: Complex64, path_id: &str) -> Option<PeriodPoint> {
        if !self.is_enabled() {
            return None;
        }
        let hit = self.records.get(&key(fibration, y, path_id)).map(CacheRecord::point);
        if hit.is_some() {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        hit
    }

    pub fn insert(&mut self, rec: CacheRecord) {
        self.records
            .insert(key(&rec.fibration, rec.y, &rec.path_id), rec);
    }

    /// Adds records from `other` that are not already present.
    pub fn merge(&mut self, other: PeriodCache) {
        for (k, v) in other.records {
            self.records.entry(k).or_insert(v);
        }
    }

    /// Looks up `(fibration, y, path_id)` or computes and stores it.
    pub fn get_or_insert_with<F>(
        &mut self,
        fibration: &str,
        y: Complex64,
        path_id: &str,
        compute: F,
    ) -> Result<PeriodPoint>
    where
        F: FnOnce() -> Result<(PeriodPoint, Residuals)>,
    {
        if let Some(p) = self.get(fibration, y, path_id) {
            return Ok(p);
        }
        let (p, residuals) = compute()?;
        if self.is_enabled() {
            self.insert(CacheRecord {
                fibration: fibration.to_string(),
                y,
                pi1: p.pi1,
                pi2: p.pi2,
                path_id: path_id.to_string(),
                residuals,
            });
        }
        Ok(p)
    }

    /// Merges with whatever is on disk, then rewrites the file atomically.
    pub fn save(&mut self) -> Result<()> {
        let Some(path) = self.file.clone() else {
            return Ok(());
        };
        if path.exists() {
            let on_disk = PeriodCache::open(&path)?;
            for (k, v) in on_disk.records {
                self.records.entry(k).or_insert(v);
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            for rec in self.records.values() {
                serde_json::to_writer(&mut f, rec)?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(y: f64) -> CacheRecord {
        CacheRecord {
            fibration: "f".into(),
            y: Complex64::new(y, 0.25),
            pi1: Complex64::new(1.0 / 3.0, 0.1),
            pi2: Complex64::new(0.2, std::f64::consts::PI),
            path_id: "direct".into(),
            residuals: Residuals { j: 1e-15 },
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile_dir();
        let path = dir.join("c.jsonl");
        let mut c = PeriodCache::open(&path).unwrap();
        c.insert(rec(0.5));
        c.insert(rec(-0.1));
        c.save().unwrap();
        let mut back = PeriodCache::open(&path).unwrap();
        assert_eq!(back.len(), 2);
        let p = back.get("f", Complex64::new(0.5, 0.25), "direct").unwrap();
        assert_eq!(p.pi1, rec(0.5).pi1);
        assert_eq!(p.pi2, rec(0.5).pi2);
        fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn disabled_cache_never_hits() {
        let mut c = PeriodCache::disabled();
        c.insert(rec(1.0));
        assert!(c.get("f", Complex64::new(1.0, 0.25), "direct").is_none());
    }

    fn tempfile_dir() -> PathBuf {
        let d = std::env::temp_dir().join(format!("k3limit-cache-{}", std::process::id()));
        fs::create_dir_all(&d).unwrap();
        d
    }
}
