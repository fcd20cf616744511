//! Motions, multi-caption groups, the JSONL exchange format and the synthetic
//! generator with known latent atoms.

mod jsonl;
mod paraphrase;
mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jsonl::{load_jsonl, save_jsonl, to_jsonl_string};
pub use paraphrase::ParaphraseRegistry;
pub use synth::{generate_paraphrases, generate_synthetic, vocab, SynthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptionSource {
    Original,
    Canonical,
    Paraphrase,
}

/// One action of the motion-recoverable content of a motion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub verb: String,
    pub direction: Option<String>,
    pub limb: Option<String>,
    pub object: Option<String>,
    pub repetition: Option<u32>,
}

impl Atom {
    pub fn verb(verb: &str) -> Self {
        Self {
            verb: verb.to_string(),
            direction: None,
            limb: None,
            object: None,
            repetition: None,
        }
    }

    pub fn with_direction(mut self, d: &str) -> Self {
        self.direction = Some(d.to_string());
        self
    }

    pub fn with_limb(mut self, l: &str) -> Self {
        self.limb = Some(l.to_string());
        self
    }

    pub fn with_object(mut self, o: &str) -> Self {
        self.object = Some(o.to_string());
        self
    }

    pub fn with_repetition(mut self, n: u32) -> Self {
        self.repetition = Some(n);
        self
    }
}

/// Ground-truth semantics of a synthetic motion: an ordered action sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatentAtoms {
    pub atoms: Vec<Atom>,
}

impl LatentAtoms {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub id: String,
    pub features: Vec<f64>,
    pub split: Split,
    pub ext_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub id: String,
    pub motion_id: String,
    pub text: String,
    pub source: CaptionSource,
    pub latents: Option<LatentAtoms>,
}

/// Motions with their caption groups.
///
/// Captions are stored grouped by motion, in motion order. The dataset name
/// is not persisted by the JSONL format and does not take part in equality.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    motion_dim: usize,
    motions: Vec<Motion>,
    captions: Vec<Caption>,
    groups: Vec<Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.motion_dim == other.motion_dim
            && self.motions == other.motions
            && self.captions == other.captions
    }
}

impl Dataset {
    /// Builds a dataset and checks every structural invariant: unique ids,
    /// consistent feature length, captions resolving to motions, non-empty
    /// text and at least one caption per motion.
    pub fn new(
        name: impl Into<String>,
        motion_dim: usize,
        motions: Vec<Motion>,
        captions: Vec<Caption>,
    ) -> Result<Self> {
        let mut pos: HashMap<&str, usize> = HashMap::with_capacity(motions.len());
        for (i, m) in motions.iter().enumerate() {
            if m.features.len() != motion_dim {
                return Err(Error::Integrity(format!(
                    "motion {} has {} features, expected {}",
                    m.id,
                    m.features.len(),
                    motion_dim
                )));
            }
            if pos.insert(m.id.as_str(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate motion id {}", m.id)));
            }
        }
        let mut counts = vec![0usize; motions.len()];
        let mut seen = HashSet::with_capacity(captions.len());
        for c in &captions {
            let Some(&mi) = pos.get(c.motion_id.as_str()) else {
                return Err(Error::Integrity(format!(
                    "caption {} references unknown motion {}",
                    c.id, c.motion_id
                )));
            };
            if c.text.trim().is_empty() {
                return Err(Error::Integrity(format!("caption {} has empty text", c.id)));
            }
            if !seen.insert(c.id.as_str()) {
                return Err(Error::Integrity(format!("duplicate caption id {}", c.id)));
            }
            counts[mi] += 1;
        }
        if let Some(i) = counts.iter().position(|&n| n == 0) {
            return Err(Error::Integrity(format!(
                "motion {} has no captions",
                motions[i].id
            )));
        }
        // Store captions grouped by motion, keeping their relative order.
        let mut buckets: Vec<Vec<Caption>> = vec![Vec::new(); motions.len()];
        for c in captions {
            let mi = pos[c.motion_id.as_str()];
            buckets[mi].push(c);
        }
        let mut captions = Vec::new();
        let mut groups = Vec::with_capacity(motions.len());
        for b in buckets {
            let start = captions.len();
            captions.extend(b);
            groups.push((start..captions.len()).collect());
        }
        Ok(Self {
            name: name.into(),
            motion_dim,
            motions,
            captions,
            groups,
        })
    }

    pub fn motion_dim(&self) -> usize {
        self.motion_dim
    }

    pub fn motions(&self) -> &[Motion] {
        &self.motions
    }

    pub fn captions(&self) -> &[Caption] {
        &self.captions
    }

    /// Caption indices of the motion at `motion_index`.
    pub fn caption_indices(&self, motion_index: usize) -> &[usize] {
        &self.groups[motion_index]
    }

    pub fn captions_of(&self, motion_index: usize) -> impl Iterator<Item = &Caption> {
        self.groups[motion_index].iter().map(|&i| &self.captions[i])
    }

    /// Motion index owning caption `caption_index`.
    pub fn motion_of_caption(&self) -> Vec<usize> {
        let mut owner = vec![0; self.captions.len()];
        for (m, g) in self.groups.iter().enumerate() {
            for &c in g {
                owner[c] = m;
            }
        }
        owner
    }

    pub fn motion_index(&self, id: &str) -> Option<usize> {
        self.motions.iter().position(|m| m.id == id)
    }

    /// The motions of one split together with their captions.
    pub fn subset(&self, split: Split) -> Dataset {
        self.filter_motions(|m| m.split == split)
    }

    pub fn filter_motions(&self, keep: impl Fn(&Motion) -> bool) -> Dataset {
        let mut motions = Vec::new();
        let mut captions = Vec::new();
        for (i, m) in self.motions.iter().enumerate() {
            if keep(m) {
                motions.push(m.clone());
                captions.extend(self.captions_of(i).cloned());
            }
        }
        Dataset::new(self.name.clone(), self.motion_dim, motions, captions)
            .expect("subset of a valid dataset is valid")
    }

    /// Same motions, captions replaced. Used for canonicalized and
    /// paraphrased views of a dataset.
    pub fn with_captions(&self, captions: Vec<Caption>) -> Result<Dataset> {
        Dataset::new(self.name.clone(), self.motion_dim, self.motions.clone(), captions)
    }
}

/// Captions partitioned by motion, ordered by motion id.
pub fn group_by_motion(ds: &Dataset) -> Vec<(String, Vec<&Caption>)> {
    let mut order: Vec<usize> = (0..ds.motions.len()).collect();
    order.sort_by(|&a, &b| ds.motions[a].id.cmp(&ds.motions[b].id));
    order
        .into_iter()
        .map(|i| (ds.motions[i].id.clone(), ds.captions_of(i).collect()))
        .collect()
}

/// One-to-one pairing of motions across two datasets by their external key.
///
/// Keys are visited in sorted order; within a dataset the first motion
/// carrying a key wins.
pub fn match_paired_motions(a: &Dataset, b: &Dataset) -> Vec<(String, String)> {
    fn first_by_key(ds: &Dataset) -> BTreeMap<&str, &str> {
        let mut map = BTreeMap::new();
        for m in &ds.motions {
            if let Some(k) = &m.ext_key {
                map.entry(k.as_str()).or_insert(m.id.as_str());
            }
        }
        map
    }
    let ka = first_by_key(a);
    let kb = first_by_key(b);
    ka.iter()
        .filter_map(|(k, ida)| kb.get(k).map(|idb| (ida.to_string(), idb.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn motion(id: &str, key: Option<&str>) -> Motion {
        Motion {
            id: id.into(),
            features: vec![0.0, 1.0],
            split: Split::Train,
            ext_key: key.map(Into::into),
        }
    }

    fn caption(id: &str, m: &str, text: &str) -> Caption {
        Caption {
            id: id.into(),
            motion_id: m.into(),
            text: text.into(),
            source: CaptionSource::Original,
            latents: None,
        }
    }

    fn toy() -> Dataset {
        Dataset::new(
            "toy",
            2,
            vec![motion("m1", Some("k1")), motion("m0", Some("k0"))],
            vec![
                caption("c0", "m0", "walk"),
                caption("c1", "m1", "run"),
                caption("c2", "m0", "walk forward"),
                caption("c3", "m0", "stroll"),
                caption("c4", "m1", "jog"),
                caption("c5", "m1", "sprint"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn group_by_motion_partitions_captions() {
        let ds = toy();
        let groups = group_by_motion(&ds);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "m0");
        assert!(groups.iter().all(|(_, g)| g.len() == 3));
        let mut flat: Vec<&str> = groups
            .iter()
            .flat_map(|(_, g)| g.iter().map(|c| c.id.as_str()))
            .collect();
        flat.sort();
        assert_eq!(flat, vec!["c0", "c1", "c2", "c3", "c4", "c5"]);
    }

    #[test]
    fn single_caption_motion_group() {
        let ds = Dataset::new(
            "one",
            2,
            vec![motion("a", None), motion("b", None)],
            vec![caption("x", "a", "walk"), caption("y", "b", "run"), caption("z", "b", "jog")],
        )
        .unwrap();
        let groups = group_by_motion(&ds);
        assert_eq!(groups[0].1.len(), 1);
        assert_eq!(groups[1].1.len(), 2);
    }

    #[test]
    fn rejects_dangling_caption_and_orphan_motion() {
        let err = Dataset::new("d", 2, vec![motion("a", None)], vec![caption("x", "nope", "t")]);
        assert!(matches!(err, Err(Error::Integrity(_))));
        let err = Dataset::new(
            "d",
            2,
            vec![motion("a", None), motion("b", None)],
            vec![caption("x", "a", "t")],
        );
        assert!(matches!(err, Err(Error::Integrity(_))));
        let err = Dataset::new("d", 2, vec![motion("a", None)], vec![caption("x", "a", "  ")]);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn matching() {
        let a = toy();
        let pairs = match_paired_motions(&a, &a);
        assert_eq!(
            pairs,
            vec![("m0".into(), "m0".into()), ("m1".into(), "m1".into())]
        );
        let b = Dataset::new(
            "b",
            2,
            vec![motion("q", Some("zz"))],
            vec![caption("c", "q", "walk")],
        )
        .unwrap();
        assert!(match_paired_motions(&a, &b).is_empty());
    }

    #[test]
    fn first_occurrence_wins() {
        let a = Dataset::new(
            "a",
            2,
            vec![motion("x1", Some("k")), motion("x2", Some("k"))],
            vec![caption("c1", "x1", "t"), caption("c2", "x2", "t")],
        )
        .unwrap();
        let pairs = match_paired_motions(&a, &a);
        assert_eq!(pairs, vec![("x1".into(), "x1".into())]);
    }
}
