use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paraphrases keyed by caption id, exchanged as JSONL
/// `{"caption_id": "...", "paraphrases": ["...", ...]}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParaphraseRegistry {
    entries: BTreeMap<String, Vec<String>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    caption_id: String,
    paraphrases: Vec<String>,
}

impl ParaphraseRegistry {
    pub fn insert(&mut self, caption_id: &str, paraphrases: Vec<String>) {
        self.entries.insert(caption_id.to_string(), paraphrases);
    }

    pub fn get(&self, caption_id: &str) -> Option<&[String]> {
        self.entries.get(caption_id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut out = String::new();
        for (id, paras) in &self.entries {
            let rec = Record {
                caption_id: id.clone(),
                paraphrases: paras.clone(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("registry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut reg = Self::default();
        for (n, line) in body.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| Error::Schema {
                path: path.to_path_buf(),
                line: n + 1,
                reason: e.to_string(),
            })?;
            if rec.paraphrases.iter().any(|p| p.trim().is_empty()) {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    line: n + 1,
                    reason: "empty paraphrase".into(),
                });
            }
            reg.entries.insert(rec.caption_id, rec.paraphrases);
        }
        Ok(reg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_round_trip() {
        let mut reg = ParaphraseRegistry::default();
        reg.insert("c1", vec!["walk ahead".into(), "go forward".into()]);
        reg.insert("c0", vec!["turn".into()]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("para.jsonl");
        reg.save(&p).unwrap();
        let body = fs::read_to_string(&p).unwrap();
        assert!(body.starts_with(r#"{"caption_id":"c0","paraphrases":["turn"]}"#));
        assert_eq!(ParaphraseRegistry::load(&p).unwrap(), reg);
    }
}
