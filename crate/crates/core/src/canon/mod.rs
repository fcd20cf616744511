//! The canonicalization operator in its identity, rule-based, latent-oracle,
//! cached and remote forms, and its dataset-level application.

pub mod cache;
pub mod oracle;
pub mod remote;
pub mod stopword;
pub mod wordlists;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, CaptionSource, Dataset};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub use cache::CanonCache;
pub use oracle::canon_oracle;
pub use remote::{canon_remote, EndpointConfig, CANON_V1_PROMPT};
pub use stopword::{canon_stopword, DEFAULT_STRIP};
pub use wordlists::{Category, WordLists};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CanonKind {
    Identity,
    Stopword,
    Oracle,
    Cached,
    Remote,
}

#[derive(Debug, Clone)]
pub enum Canonicalizer {
    Identity,
    Stopword {
        wordlists: WordLists,
        strip: Vec<Category>,
    },
    /// Renders ground-truth latents; only defined for captions carrying them.
    Oracle,
    Cached {
        cache: CanonCache,
    },
    Remote {
        endpoint: EndpointConfig,
        cache: CanonCache,
    },
}

impl Canonicalizer {
    pub fn stopword() -> Self {
        Canonicalizer::Stopword {
            wordlists: WordLists::builtin(),
            strip: DEFAULT_STRIP.to_vec(),
        }
    }

    pub fn kind(&self) -> CanonKind {
        match self {
            Canonicalizer::Identity => CanonKind::Identity,
            Canonicalizer::Stopword { .. } => CanonKind::Stopword,
            Canonicalizer::Oracle => CanonKind::Oracle,
            Canonicalizer::Cached { .. } => CanonKind::Cached,
            Canonicalizer::Remote { .. } => CanonKind::Remote,
        }
    }

    /// Word lists used for removal statistics.
    pub fn wordlists(&self) -> WordLists {
        match self {
            Canonicalizer::Stopword { wordlists, .. } => wordlists.clone(),
            _ => WordLists::builtin(),
        }
    }

    /// Canonicalizes free text. The oracle kind needs latents and rejects
    /// plain text; use [`canonicalize_caption`](Self::canonicalize_caption).
    pub fn canonicalize(&self, text: &str) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::EmptyText);
        }
        let out = match self {
            Canonicalizer::Identity => text.to_string(),
            Canonicalizer::Stopword { wordlists, strip } => canon_stopword(wordlists, strip, text),
            Canonicalizer::Oracle => {
                return Err(Error::validation(
                    "canonicalizer",
                    "oracle canonicalization requires caption latents",
                ))
            }
            Canonicalizer::Cached { cache } => cache.get(text).ok_or_else(|| Error::CacheMiss {
                text: text.to_string(),
                caption_id: None,
            })?,
            Canonicalizer::Remote { endpoint, cache } => {
                canon_remote(endpoint, cache, &[text.to_string()])?.remove(0)
            }
        };
        Ok(non_empty(out, text))
    }

    pub fn canonicalize_caption(&self, caption: &Caption) -> Result<String> {
        match self {
            Canonicalizer::Oracle => match &caption.latents {
                Some(l) => Ok(non_empty(canon_oracle(l), &caption.text)),
                None => Err(Error::Integrity(format!(
                    "caption {} has no latents for oracle canonicalization",
                    caption.id
                ))),
            },
            _ => self
                .canonicalize(&caption.text)
                .map_err(|e| e.with_caption_id(&caption.id)),
        }
    }

    /// Canonical text of every caption, in order. Cache misses are collected
    /// and reported together; remote misses go out in batches.
    pub fn canonicalize_all(&self, captions: &[Caption]) -> Result<Vec<String>> {
        match self {
            Canonicalizer::Cached { cache } => {
                let mut out = Vec::with_capacity(captions.len());
                let mut missing = Vec::new();
                for c in captions {
                    match cache.get(&c.text) {
                        Some(t) => out.push(non_empty(t, &c.text)),
                        None => missing.push(c.id.clone()),
                    }
                }
                if missing.is_empty() {
                    Ok(out)
                } else {
                    Err(Error::CacheMisses { caption_ids: missing })
                }
            }
            Canonicalizer::Remote { endpoint, cache } => {
                let texts: Vec<String> = captions.iter().map(|c| c.text.clone()).collect();
                let out = canon_remote(endpoint, cache, &texts)?;
                Ok(out
                    .into_iter()
                    .zip(captions)
                    .map(|(o, c)| non_empty(o, &c.text))
                    .collect())
            }
            _ => captions.iter().map(|c| self.canonicalize_caption(c)).collect(),
        }
    }
}

fn non_empty(out: String, original: &str) -> String {
    if out.trim().is_empty() {
        original.trim().to_lowercase()
    } else {
        out
    }
}

/// How much a canonicalizer changed a caption set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModificationStats {
    pub n_total: usize,
    pub n_modified: usize,
    pub fraction_modified: f64,
    /// Original tokens absent from the canonical text, by word category.
    pub removed: BTreeMap<Category, usize>,
}

/// Replaces every caption with its canonical form (same id and motion,
/// source `canonical`) and tallies what changed.
pub fn canonicalize_dataset(ds: &Dataset, c: &Canonicalizer) -> Result<(Dataset, ModificationStats)> {
    let canon = c.canonicalize_all(ds.captions())?;
    let wl = c.wordlists();
    let mut n_modified = 0;
    let mut removed: BTreeMap<Category, usize> = BTreeMap::new();
    let mut captions = Vec::with_capacity(canon.len());
    for (orig, text) in ds.captions().iter().zip(canon) {
        if text != orig.text {
            n_modified += 1;
        }
        let canon_tokens: HashSet<String> = tokenize(&text).into_iter().collect();
        for (cat, n) in wordlists::removed_by_category(&wl, &tokenize(&orig.text), &canon_tokens) {
            *removed.entry(cat).or_insert(0) += n;
        }
        captions.push(Caption {
            text,
            source: CaptionSource::Canonical,
            ..orig.clone()
        });
    }
    let n_total = captions.len();
    let stats = ModificationStats {
        n_total,
        n_modified,
        fraction_modified: if n_total == 0 { 0.0 } else { n_modified as f64 / n_total as f64 },
        removed,
    };
    Ok((ds.with_captions(captions)?, stats))
}
