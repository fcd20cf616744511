//! Retrieval ranking, recall metrics and the Full / DsPair / Threshold
//! correctness protocols.

mod rank;
mod similarity;

pub use rank::{fair_rank, median_rank, rank_queries, recall_at_k};
pub use similarity::{tfidf_cosine, SimMatrix, SimProvider, SIM_MAGIC, SIM_VERSION};

use serde::{Deserialize, Serialize};

use crate::canon::Canonicalizer;
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{Checkpoint, Encoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Full,
    Dspair,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    pub kind: ProtocolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_provider: Option<SimProvider>,
}

impl Protocol {
    pub fn full() -> Self {
        Self {
            kind: ProtocolKind::Full,
            threshold_norm: None,
            sim_provider: None,
        }
    }

    pub fn dspair() -> Self {
        Self {
            kind: ProtocolKind::Dspair,
            ..Self::full()
        }
    }

    pub fn threshold(threshold_norm: f64, sim_provider: SimProvider) -> Self {
        Self {
            kind: ProtocolKind::Threshold,
            threshold_norm: Some(threshold_norm),
            sim_provider: Some(sim_provider),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, self.threshold_norm, &self.sim_provider) {
            (ProtocolKind::Threshold, Some(t), Some(_)) if (0.0..=1.0).contains(&t) => Ok(()),
            (ProtocolKind::Threshold, Some(_), Some(_)) => {
                Err(Error::validation("protocol.threshold_norm", "must lie in [0, 1]"))
            }
            (ProtocolKind::Threshold, _, _) => Err(Error::validation(
                "protocol",
                "threshold protocol needs threshold_norm and sim_provider",
            )),
            (_, None, None) => Ok(()),
            _ => Err(Error::validation(
                "protocol",
                "threshold_norm and sim_provider apply only to the threshold protocol",
            )),
        }
    }
}

/// Raw cosine cutoff `2t − 1` for a similarity threshold given on the
/// normalized `(cos+1)/2` scale, snapped to twelve decimals so decimal
/// thresholds map to their decimal cutoffs.
pub fn raw_cutoff(threshold_norm: f64) -> f64 {
    ((2.0 * threshold_norm - 1.0) * 1e12).round() / 1e12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "t2m")]
    T2M,
    #[serde(rename = "m2t")]
    M2T,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::T2M => "t2m",
            Direction::M2T => "m2t",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMode {
    Original,
    Canonical,
}

/// Queries, gallery and per-query correct gallery positions for one
/// direction. Text items are caption indices, motion items motion indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalTask {
    pub direction: Direction,
    pub queries: Vec<usize>,
    pub gallery: Vec<usize>,
    pub correct: Vec<Vec<usize>>,
}

/// Index of the lexicographically first caption id of each motion.
fn first_captions(ds: &Dataset) -> Vec<usize> {
    (0..ds.motions().len())
        .map(|m| {
            *ds.caption_indices(m)
                .iter()
                .min_by(|&&a, &&b| ds.captions()[a].id.cmp(&ds.captions()[b].id))
                .expect("every motion has a caption")
        })
        .collect()
}

/// Builds both directions' tasks. Threshold grouping compares the dataset's
/// own caption texts.
pub fn build_tasks(ds: &Dataset, protocol: &Protocol) -> Result<(RetrievalTask, RetrievalTask)> {
    protocol.validate()?;
    let n_motions = ds.motions().len();
    let n_caps = ds.captions().len();
    let owner = ds.motion_of_caption();
    let all_motions: Vec<usize> = (0..n_motions).collect();
    let all_caps: Vec<usize> = (0..n_caps).collect();
    Ok(match protocol.kind {
        ProtocolKind::Full => {
            let first = first_captions(ds);
            (
                RetrievalTask {
                    direction: Direction::T2M,
                    queries: first.clone(),
                    gallery: all_motions.clone(),
                    correct: (0..n_motions).map(|m| vec![m]).collect(),
                },
                RetrievalTask {
                    direction: Direction::M2T,
                    queries: all_motions,
                    gallery: first,
                    correct: (0..n_motions).map(|m| vec![m]).collect(),
                },
            )
        }
        ProtocolKind::Dspair => (
            RetrievalTask {
                direction: Direction::T2M,
                queries: all_caps.clone(),
                gallery: all_motions.clone(),
                correct: owner.iter().map(|&m| vec![m]).collect(),
            },
            RetrievalTask {
                direction: Direction::M2T,
                queries: all_motions,
                gallery: all_caps,
                correct: (0..n_motions).map(|m| ds.caption_indices(m).to_vec()).collect(),
            },
        ),
        ProtocolKind::Threshold => {
            let provider = protocol.sim_provider.as_ref().expect("validated");
            let cut = raw_cutoff(protocol.threshold_norm.expect("validated"));
            let texts: Vec<&str> = ds.captions().iter().map(|c| c.text.as_str()).collect();
            let sim = provider.matrix(&texts)?;
            let neighbours: Vec<Vec<usize>> = (0..n_caps)
                .map(|i| {
                    sim.row(i)
                        .iter()
                        .enumerate()
                        .filter(|&(j, &s)| j == i || s >= cut)
                        .map(|(j, _)| j)
                        .collect()
                })
                .collect();
            let t2m = neighbours
                .iter()
                .map(|ns| {
                    let mut ms: Vec<usize> = ns.iter().map(|&j| owner[j]).collect();
                    ms.sort_unstable();
                    ms.dedup();
                    ms
                })
                .collect();
            let m2t = (0..n_motions)
                .map(|m| {
                    let mut cs: Vec<usize> = ds
                        .caption_indices(m)
                        .iter()
                        .flat_map(|&i| neighbours[i].iter().copied())
                        .collect();
                    cs.sort_unstable();
                    cs.dedup();
                    cs
                })
                .collect();
            (
                RetrievalTask {
                    direction: Direction::T2M,
                    queries: all_caps.clone(),
                    gallery: all_motions.clone(),
                    correct: t2m,
                },
                RetrievalTask {
                    direction: Direction::M2T,
                    queries: all_motions,
                    gallery: all_caps,
                    correct: m2t,
                },
            )
        }
    })
}

pub fn build_correct_sets(ds: &Dataset, protocol: &Protocol, direction: Direction) -> Result<Vec<Vec<usize>>> {
    let (t2m, m2t) = build_tasks(ds, protocol)?;
    Ok(match direction {
        Direction::T2M => t2m.correct,
        Direction::M2T => m2t.correct,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub direction: Direction,
    pub protocol: Protocol,
    pub text_mode: TextMode,
    pub n_queries: usize,
    pub gallery_size: usize,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
    pub medr: f64,
    /// Caption ids (T2M) or motion ids (M2T), parallel to `ranks`.
    pub query_ids: Vec<String>,
    pub ranks: Vec<f64>,
}

impl RetrievalReport {
    pub fn from_ranks(
        direction: Direction,
        protocol: Protocol,
        text_mode: TextMode,
        gallery_size: usize,
        query_ids: Vec<String>,
        ranks: Vec<f64>,
    ) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::validation("queries", "retrieval needs at least one query"));
        }
        if query_ids.len() != ranks.len() {
            return Err(Error::Shape("query ids and ranks differ in length".into()));
        }
        Ok(Self {
            direction,
            protocol,
            text_mode,
            n_queries: ranks.len(),
            gallery_size,
            r1: recall_at_k(&ranks, 1),
            r5: recall_at_k(&ranks, 5),
            r10: recall_at_k(&ranks, 10),
            medr: median_rank(&ranks),
            query_ids,
            ranks,
        })
    }

    /// Whether each query's correct item was ranked first.
    pub fn hits_at_1(&self) -> Vec<bool> {
        self.ranks.iter().map(|&r| r <= 1.0).collect()
    }
}

/// Header for [`report_row`].
pub const REPORT_CSV_HEADER: &str = "protocol,text_mode,t2m_r1,t2m_r5,t2m_r10,t2m_medr,m2t_r1,m2t_r5,m2t_r10,m2t_medr";

/// One table row with both directions' R@1, R@5, R@10 and MedR.
pub fn report_row(t2m: &RetrievalReport, m2t: &RetrievalReport) -> String {
    let kind = match t2m.protocol.kind {
        ProtocolKind::Full => "full",
        ProtocolKind::Dspair => "dspair",
        ProtocolKind::Threshold => "threshold",
    };
    let mode = match t2m.text_mode {
        TextMode::Original => "original",
        TextMode::Canonical => "canonical",
    };
    format!(
        "{kind},{mode},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2}",
        t2m.r1, t2m.r5, t2m.r10, t2m.medr, m2t.r1, m2t.r5, m2t.r10, m2t.medr
    )
}

fn select_rows(m: &Matrix, rows: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), m.cols());
    for (i, &r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(m.row(r));
    }
    out
}

/// Scores precomputed unit embeddings: `e_text` has one row per caption of
/// `ds`, `e_motion` one row per motion.
pub fn evaluate_embeddings(
    ds: &Dataset,
    e_text: &Matrix,
    e_motion: &Matrix,
    protocol: &Protocol,
    text_mode: TextMode,
) -> Result<(RetrievalReport, RetrievalReport)> {
    if e_text.rows() != ds.captions().len() || e_motion.rows() != ds.motions().len() {
        return Err(Error::Shape("embedding rows do not match the dataset".into()));
    }
    let (t2m, m2t) = build_tasks(ds, protocol)?;
    let run = |task: &RetrievalTask| -> Result<RetrievalReport> {
        let (q, g, ids): (Matrix, Matrix, Vec<String>) = match task.direction {
            Direction::T2M => (
                select_rows(e_text, &task.queries),
                select_rows(e_motion, &task.gallery),
                task.queries.iter().map(|&i| ds.captions()[i].id.clone()).collect(),
            ),
            Direction::M2T => (
                select_rows(e_motion, &task.queries),
                select_rows(e_text, &task.gallery),
                task.queries.iter().map(|&i| ds.motions()[i].id.clone()).collect(),
            ),
        };
        let ranks = rank_queries(&q, &g, &task.correct)?;
        RetrievalReport::from_ranks(task.direction, protocol.clone(), text_mode, g.rows(), ids, ranks)
    };
    Ok((run(&t2m)?, run(&m2t)?))
}

/// Encodes `ds` with the checkpoint and scores both directions. In canonical
/// mode every caption is canonicalized before featurization; threshold
/// grouping still compares the original captions.
pub fn evaluate(
    ckpt: &Checkpoint,
    ds: &Dataset,
    protocol: &Protocol,
    text_mode: TextMode,
    canonicalizer: Option<&Canonicalizer>,
) -> Result<(RetrievalReport, RetrievalReport)> {
    let texts: Vec<String> = match text_mode {
        TextMode::Original => ds.captions().iter().map(|c| c.text.clone()).collect(),
        TextMode::Canonical => canonicalizer
            .ok_or_else(|| Error::validation("canonicalizer", "canonical text mode needs a canonicalizer"))?
            .canonicalize_all(ds.captions())?,
    };
    let enc = Encoder::from_checkpoint(ckpt);
    let et = enc.texts(&texts)?;
    let em = enc.motions(ds)?;
    evaluate_embeddings(ds, &et, &em, protocol, text_mode)
}
