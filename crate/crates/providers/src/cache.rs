use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use parking_lot::RwLock;
use qmcdm_core::RawValue;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache file {path}, line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One persisted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub source: String,
    pub alternative: String,
    pub value: RawValue,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CachedValue {
    pub value: RawValue,
    pub fetched_at: DateTime<Utc>,
    /// Older than the cache's ttl at lookup time.
    pub expired: bool,
}

type Entries = BTreeMap<(String, String), (RawValue, DateTime<Utc>)>;

/// Fetched metric values keyed by (source id, alternative id). Safe to share
/// between threads.
#[derive(Debug)]
pub struct MetricCache {
    entries: RwLock<Entries>,
    ttl: Duration,
}

impl MetricCache {
    pub fn new(ttl: Duration) -> Self {
        Self {
            entries: RwLock::new(BTreeMap::new()),
            ttl,
        }
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.read().is_empty()
    }

    pub fn get(&self, source: &str, alternative: &str, now: DateTime<Utc>) -> Option<CachedValue> {
        let entries = self.entries.read();
        let (value, fetched_at) = entries.get(&(source.to_string(), alternative.to_string()))?;
        Some(CachedValue {
            value: value.clone(),
            fetched_at: *fetched_at,
            expired: now - *fetched_at > self.ttl,
        })
    }

    pub fn insert(
        &self,
        source: &str,
        alternative: &str,
        value: RawValue,
        fetched_at: DateTime<Utc>,
    ) {
        self.entries.write().insert(
            (source.to_string(), alternative.to_string()),
            (value, fetched_at),
        );
    }

    pub fn records(&self) -> Vec<CacheRecord> {
        self.entries
            .read()
            .iter()
            .map(|((source, alternative), (value, timestamp))| CacheRecord {
                source: source.clone(),
                alternative: alternative.clone(),
                value: value.clone(),
                timestamp: *timestamp,
            })
            .collect()
    }

    /// Loads `path`, or starts empty when it does not exist yet. Later lines
    /// win over earlier ones for the same key.
    pub fn load(path: &Path, ttl: Duration) -> Result<Self, CacheError> {
        let cache = Self::new(ttl);
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(source) => {
                return Err(CacheError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| CacheError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let r: CacheRecord = serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            cache.insert(&r.source, &r.alternative, r.value, r.timestamp);
        }
        Ok(cache)
    }

    /// Writes every entry as one JSON line, sorted by key. The file is
    /// replaced atomically.
    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let io = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("tmp");
        let mut out = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(io)?);
        for r in self.records() {
            let line = serde_json::to_string(&r).expect("cache records serialize");
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)?;
        drop(out);
        std::fs::rename(&tmp, path).map_err(io)
    }
}
