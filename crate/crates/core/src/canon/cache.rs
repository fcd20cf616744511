use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    original: String,
    canonical: String,
}

/// Original → canonical text map with optional JSONL write-through backing.
///
/// Keys are the trimmed, case-preserved original text. Reads may run
/// concurrently; inserts are serialized and appended to the backing file.
#[derive(Debug, Default)]
pub struct CanonCache {
    map: RwLock<HashMap<String, String>>,
    path: Option<PathBuf>,
    writer: Mutex<()>,
}

impl Clone for CanonCache {
    fn clone(&self) -> Self {
        Self {
            map: RwLock::new(self.map.read().unwrap().clone()),
            path: self.path.clone(),
            writer: Mutex::new(()),
        }
    }
}

impl CanonCache {
    /// In-memory cache without a backing file.
    pub fn in_memory<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let map = entries
            .into_iter()
            .map(|(k, v)| (k.into().trim().to_string(), v.into()))
            .collect();
        Self {
            map: RwLock::new(map),
            path: None,
            writer: Mutex::new(()),
        }
    }

    /// Opens a JSONL cache file; a missing file yields an empty cache that
    /// will be created on first insert.
    pub fn open(path: &Path) -> Result<Self> {
        let mut map = HashMap::new();
        match fs::read_to_string(path) {
            Ok(body) => {
                for (n, line) in body.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let e: Entry = serde_json::from_str(line).map_err(|e| Error::Schema {
                        path: path.to_path_buf(),
                        line: n + 1,
                        reason: e.to_string(),
                    })?;
                    map.insert(e.original.trim().to_string(), e.canonical);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(path, e)),
        }
        Ok(Self {
            map: RwLock::new(map),
            path: Some(path.to_path_buf()),
            writer: Mutex::new(()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, original: &str) -> Option<String> {
        self.map.read().unwrap().get(original.trim()).cloned()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Inserts entries and appends them to the backing file, if any.
    pub fn insert_all(&self, entries: &[(String, String)]) -> Result<()> {
        let _guard = self.writer.lock().unwrap();
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let mut buf = String::new();
            for (o, c) in entries {
                let line = serde_json::to_string(&Entry {
                    original: o.trim().to_string(),
                    canonical: c.clone(),
                })
                .expect("cache entry serializes");
                buf.push_str(&line);
                buf.push('\n');
            }
            f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        let mut map = self.map.write().unwrap();
        for (o, c) in entries {
            map.insert(o.trim().to_string(), c.clone());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_trimmed_case_preserved_lookup() {
        let c = CanonCache::in_memory([("  Walk Forward ", "walk forward")]);
        assert_eq!(c.get("Walk Forward").as_deref(), Some("walk forward"));
        assert_eq!(c.get("walk forward"), None);
    }

    #[test]
    fn write_through_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cache.jsonl");
        let c = CanonCache::open(&p).unwrap();
        assert!(c.is_empty());
        c.insert_all(&[("a person walks".into(), "walk".into())]).unwrap();
        let again = CanonCache::open(&p).unwrap();
        assert_eq!(again.get("a person walks").as_deref(), Some("walk"));
        let body = fs::read_to_string(&p).unwrap();
        assert_eq!(body, "{\"original\":\"a person walks\",\"canonical\":\"walk\"}\n");
    }
}
