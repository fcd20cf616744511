use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Caption, CaptionSource, Dataset, LatentAtoms, Motion, Split};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionRecord {
    id: String,
    split: Split,
    ext_key: Option<String>,
    features: Vec<f64>,
    captions: Vec<CaptionRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaptionRecord {
    id: String,
    text: String,
    source: CaptionSource,
    latents: Option<LatentAtoms>,
}

/// Serializes a dataset in the one-motion-per-line JSONL format.
pub fn to_jsonl_string(ds: &Dataset) -> String {
    let mut out = String::new();
    for (i, m) in ds.motions().iter().enumerate() {
        let record = MotionRecord {
            id: m.id.clone(),
            split: m.split,
            ext_key: m.ext_key.clone(),
            features: m.features.clone(),
            captions: ds
                .captions_of(i)
                .map(|c| CaptionRecord {
                    id: c.id.clone(),
                    text: c.text.clone(),
                    source: c.source,
                    latents: c.latents.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("dataset records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_jsonl(ds: &Dataset, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_jsonl_string(ds).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_jsonl(path: &Path) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut motions = Vec::new();
    let mut captions = Vec::new();
    let mut motion_dim = None;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |reason: String| Error::Schema {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        };
        let rec: MotionRecord = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if rec.features.iter().any(|v| !v.is_finite()) {
            return Err(schema("non-finite feature".into()));
        }
        match motion_dim {
            None => motion_dim = Some(rec.features.len()),
            Some(d) if d != rec.features.len() => {
                return Err(schema(format!(
                    "features has length {}, expected {}",
                    rec.features.len(),
                    d
                )))
            }
            _ => {}
        }
        if rec.captions.is_empty() {
            return Err(schema("motion has no captions".into()));
        }
        for c in rec.captions {
            if c.text.trim().is_empty() {
                return Err(schema(format!("caption {} has empty text", c.id)));
            }
            captions.push(Caption {
                id: c.id,
                motion_id: rec.id.clone(),
                text: c.text,
                source: c.source,
                latents: c.latents,
            });
        }
        motions.push(Motion {
            id: rec.id,
            features: rec.features,
            split: rec.split,
            ext_key: rec.ext_key,
        });
    }
    Dataset::new(name, motion_dim.unwrap_or(0), motions, captions)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"{"id":"m0","split":"train","ext_key":null,"features":[0.1,0.2],"captions":[{"id":"c0","text":"walk forward","source":"original","latents":{"atoms":[{"verb":"walk","direction":"forward","limb":null,"object":null,"repetition":null}]}}]}"#;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("ds.jsonl");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_documented_schema() {
        let dir = tempfile::tempdir().unwrap();
        let ds = load_jsonl(&write(&dir, GOOD)).unwrap();
        assert_eq!(ds.name, "ds");
        assert_eq!(ds.motion_dim(), 2);
        assert_eq!(ds.captions()[0].motion_id, "m0");
        assert_eq!(ds.captions()[0].latents.as_ref().unwrap().atoms[0].verb, "walk");
    }

    #[test]
    fn missing_text_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let bad = GOOD.replace(r#""text":"walk forward","#, "");
        let body = format!("{}\n{}\n", GOOD.replace("m0", "m9").replace("c0", "c9"), bad);
        match load_jsonl(&write(&dir, &body)) {
            Err(Error::Schema { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("text"), "{reason}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn ragged_features_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let other = GOOD
            .replace("m0", "m1")
            .replace("c0", "c1")
            .replace("[0.1,0.2]", "[0.1]");
        let body = format!("{GOOD}\n{other}\n");
        assert!(matches!(
            load_jsonl(&write(&dir, &body)),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_motion_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let dup = GOOD.replace("c0", "c1");
        let body = format!("{GOOD}\n{dup}\n");
        assert!(matches!(load_jsonl(&write(&dir, &body)), Err(Error::Integrity(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let body = GOOD.replace(r#""split""#, r#""extra":1,"split""#);
        assert!(matches!(load_jsonl(&write(&dir, &body)), Err(Error::Schema { .. })));
    }
}
