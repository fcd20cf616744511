use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::tokenize;

pub const SIM_MAGIC: &[u8; 4] = b"CLSM";
pub const SIM_VERSION: u32 = 1;
const SIM_TOLERANCE: f64 = 1e-6;

/// Source of caption-to-caption similarity for threshold grouping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimProvider {
    /// Unigram TF-IDF cosine over the captions being compared.
    TfidfCosine,
    /// Binary matrix file aligned with the caption order of the dataset.
    Precomputed { path: PathBuf },
}

impl SimProvider {
    pub fn matrix<S: AsRef<str>>(&self, texts: &[S]) -> Result<SimMatrix> {
        match self {
            SimProvider::TfidfCosine => Ok(tfidf_cosine(texts)),
            SimProvider::Precomputed { path } => {
                let m = SimMatrix::load(path)?;
                if m.n != texts.len() {
                    return Err(Error::Shape(format!(
                        "similarity matrix {} is {}x{} but there are {} captions",
                        path.display(),
                        m.n,
                        m.n,
                        texts.len()
                    )));
                }
                Ok(m)
            }
        }
    }
}

/// Dense symmetric similarity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimMatrix {
    pub fn from_vec(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Shape(format!("{} entries for a {n}x{n} matrix", data.len())));
        }
        let m = Self { n, data };
        m.check()?;
        Ok(m)
    }

    fn check(&self) -> Result<()> {
        for i in 0..self.n {
            if (self.get(i, i) - 1.0).abs() > SIM_TOLERANCE {
                return Err(Error::Integrity(format!("similarity diagonal at {i} is {}", self.get(i, i))));
            }
            for j in 0..i {
                let (a, b) = (self.get(i, j), self.get(j, i));
                if !a.is_finite() || (a - b).abs() > SIM_TOLERANCE {
                    return Err(Error::Integrity(format!("similarity not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Binary layout: magic, u32 version, u32 n (little endian), then `n²`
    /// f32 values row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.data.len());
        out.extend_from_slice(SIM_MAGIC);
        out.extend_from_slice(&SIM_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != SIM_MAGIC {
            return Err(Error::Shape("similarity file lacks the expected header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != SIM_VERSION {
            return Err(Error::Shape(format!("unsupported similarity file version {version}")));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let body = &bytes[12..];
        if body.len() != 4 * n * n {
            return Err(Error::Shape(format!(
                "similarity file declares n={n} but holds {} bytes of data",
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        Self::from_vec(n, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// TF-IDF cosine with smoothed idf `ln((1+n)/(1+df)) + 1`. Texts without
/// tokens are similar only to themselves.
pub fn tfidf_cosine<S: AsRef<str>>(texts: &[S]) -> SimMatrix {
    let n = texts.len();
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t.as_ref())).collect();
    let mut vocab: HashMap<&str, usize> = HashMap::new();
    let mut df: Vec<usize> = Vec::new();
    let mut counts: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for doc in &docs {
        let mut local: HashMap<usize, f64> = HashMap::new();
        for tok in doc {
            let next = vocab.len();
            let id = *vocab.entry(tok.as_str()).or_insert(next);
            if id == df.len() {
                df.push(0);
            }
            *local.entry(id).or_insert(0.0) += 1.0;
        }
        for &id in local.keys() {
            df[id] += 1;
        }
        let mut v: Vec<(usize, f64)> = local.into_iter().collect();
        v.sort_unstable_by_key(|&(id, _)| id);
        counts.push(v);
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let vecs: Vec<Vec<(usize, f64)>> = counts
        .into_iter()
        .map(|v| {
            let mut w: Vec<(usize, f64)> = v.into_iter().map(|(id, c)| (id, c * idf[id])).collect();
            let norm = w.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                w.iter_mut().for_each(|(_, x)| *x /= norm);
            }
            w
        })
        .collect();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
        for j in 0..i {
            let s = sparse_dot(&vecs[i], &vecs[j]).min(1.0);
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    SimMatrix { n, data }
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}
