//! Content-addressed result cache.
//!
//! An entry is keyed by the SHA-256 of the canonical JSON of
//! `{kind, description, build version}` and stored as
//! `<dir>/<kind>/<hash>.json`. A hit also requires the stored description to
//! match byte for byte. Unreadable entries are discarded with a warning and
//! recomputed.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::write_atomic;

pub const BUILD_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    pub build_version: String,
    pub created_unix: u64,
    pub tolerances: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry<T> {
    pub kind: String,
    pub content_hash: String,
    /// Canonical JSON of the problem description.
    pub description: String,
    pub payload: T,
    pub metadata: Metadata,
}

/// Canonical form: `serde_json` maps are key-sorted, numbers print
/// shortest round-trip.
pub fn canonical(description: &impl Serialize) -> Result<String> {
    let v = serde_json::to_value(description).map_err(|e| Error::Cache(e.to_string()))?;
    Ok(v.to_string())
}

pub fn content_hash(kind: &str, canonical_description: &str) -> String {
    let mut h = Sha256::new();
    for part in [kind, canonical_description, BUILD_VERSION] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup {
    Hit,
    Miss,
    /// Entry existed but was unreadable or described another problem.
    Rebuilt,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: Some(dir.into()) }
    }

    pub fn disabled() -> Self {
        Cache { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path(&self, kind: &str, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(kind).join(format!("{hash}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, kind: &str, description: &impl Serialize) -> Result<(Option<T>, Lookup)> {
        let desc = canonical(description)?;
        let hash = content_hash(kind, &desc);
        let Some(path) = self.path(kind, &hash) else {
            return Ok((None, Lookup::Miss));
        };
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((None, Lookup::Miss)),
            Err(e) => return Err(e.into()),
        };
        match serde_json::from_slice::<CacheEntry<T>>(&bytes) {
            Ok(entry) if entry.description == desc && entry.kind == kind => Ok((Some(entry.payload), Lookup::Hit)),
            Ok(_) => {
                tracing::warn!(path = %path.display(), "cache entry describes a different problem; recomputing");
                Ok((None, Lookup::Rebuilt))
            }
            Err(e) => {
                tracing::warn!(path = %path.display(), error = %e, "corrupt cache entry; recomputing");
                let _ = std::fs::remove_file(&path);
                Ok((None, Lookup::Rebuilt))
            }
        }
    }

    pub fn put<T: Serialize>(
        &self,
        kind: &str,
        description: &impl Serialize,
        payload: &T,
        tolerances: Value,
    ) -> Result<()> {
        let desc = canonical(description)?;
        let hash = content_hash(kind, &desc);
        let Some(path) = self.path(kind, &hash) else {
            return Ok(());
        };
        let entry = CacheEntry {
            kind: kind.to_string(),
            content_hash: hash,
            description: desc,
            payload,
            metadata: Metadata {
                build_version: BUILD_VERSION.to_string(),
                created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
                tolerances,
            },
        };
        let bytes = serde_json::to_vec(&entry).map_err(|e| Error::Cache(e.to_string()))?;
        write_atomic(&path, &bytes)
    }

    /// Cached value, or `compute()` stored on success.
    pub fn get_or_compute<T, D, F>(&self, kind: &str, description: &D, tolerances: Value, compute: F) -> Result<(T, Lookup)>
    where
        T: Serialize + DeserializeOwned,
        D: Serialize,
        F: FnOnce() -> Result<T>,
    {
        let (hit, lookup) = self.get(kind, description)?;
        if let Some(v) = hit {
            return Ok((v, lookup));
        }
        let v = compute()?;
        self.put(kind, description, &v, tolerances)?;
        Ok((v, lookup))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_is_key_order_free() {
        let a = canonical(&json!({"b": 1.5, "a": [1, 2]})).unwrap();
        let b = canonical(&json!({"a": [1, 2], "b": 1.5})).unwrap();
        assert_eq!(a, b);
        assert_ne!(content_hash("x", &a), content_hash("y", &a));
        assert_eq!(content_hash("x", &a).len(), 64);
    }

    #[test]
    fn hit_miss_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path());
        let d = json!({"nu": 0.25});
        let mut calls = 0;
        let (v, l) = c
            .get_or_compute("t", &d, json!({}), || {
                calls += 1;
                Ok(0.1f64 + 0.2)
            })
            .unwrap();
        assert_eq!((v, l), (0.1 + 0.2, Lookup::Miss));
        let (w, l) = c.get_or_compute::<f64, _, _>("t", &d, json!({}), || unreachable!()).unwrap();
        assert_eq!((w.to_bits(), l), ((0.1f64 + 0.2).to_bits(), Lookup::Hit));
        assert_eq!(calls, 1);

        let path = dir.path().join("t").join(format!("{}.json", content_hash("t", &canonical(&d).unwrap())));
        std::fs::write(&path, b"{not json").unwrap();
        let (v, l) = c.get_or_compute("t", &d, json!({}), || Ok(7.0f64)).unwrap();
        assert_eq!((v, l), (7.0, Lookup::Rebuilt));
        assert_eq!(c.get::<f64>("t", &d).unwrap(), (Some(7.0), Lookup::Hit));

        // same hash file, different stored description
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("0.25", "0.5")).unwrap();
        assert_eq!(c.get::<f64>("t", &d).unwrap(), (None, Lookup::Rebuilt));
    }

    #[test]
    fn disabled_never_stores() {
        let c = Cache::disabled();
        c.put("t", &1, &2, json!(null)).unwrap();
        assert_eq!(c.get::<i32>("t", &1).unwrap(), (None, Lookup::Miss));
    }
}
