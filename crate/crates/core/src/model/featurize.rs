use std::collections::BTreeMap;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;

use crate::error::{Error, Result};
use crate::text::tokenize;

/// Sparse vector as `(index, value)` pairs with strictly increasing indices.
pub type SparseVec = Vec<(usize, f64)>;

/// Bag-of-words token counts hashed into a fixed number of buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashedFeaturizer {
    pub dim: usize,
    pub hash_seed: u64,
}

impl Default for HashedFeaturizer {
    fn default() -> Self {
        Self {
            dim: 2048,
            hash_seed: 0,
        }
    }
}

impl HashedFeaturizer {
    pub fn new(dim: usize, hash_seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::validation("featurizer.dim", "must be at least 2"));
        }
        Ok(Self { dim, hash_seed })
    }

    pub fn bucket(&self, token: &str) -> usize {
        let mut h = SipHasher13::new_with_keys(self.hash_seed, 0x6261_6773_6f66_776f);
        h.write(token.as_bytes());
        (h.finish() % self.dim as u64) as usize
    }

    /// L2-normalized hashed token counts.
    pub fn featurize(&self, text: &str) -> Result<SparseVec> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in &tokens {
            *counts.entry(self.bucket(t)).or_insert(0.0) += 1.0;
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        Ok(counts.into_iter().map(|(i, c)| (i, c / norm)).collect())
    }
}

pub fn sparse_dot(a: &SparseVec, b: &SparseVec) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}
