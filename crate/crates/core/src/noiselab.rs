//! Supervision-noise measurements on a frozen checkpoint: within-motion
//! caption variance, InfoNCE gradient variance of the text positive, softmax
//! concentration, embedding geometry and cross-dataset alignment.

use serde::{Deserialize, Serialize};

use crate::canon::Canonicalizer;
use crate::corpus::{Dataset, ParaphraseRegistry};
use crate::error::{Error, Result};
use crate::linalg::{angle, cosine, dist_sq, dot, shifted_mean, unit_cosine, Matrix};
use crate::model::{query_gradient, softmax, Checkpoint, Encoder};
use crate::stats::{paired_t_test, TTest};

fn require_k(embs: &[&[f64]]) -> Result<()> {
    if embs.len() < 2 {
        return Err(Error::validation("embeddings", "need at least two vectors"));
    }
    Ok(())
}

/// Mean pairwise cosine dissimilarity `1 − cos`, evaluated in chord form
/// `½‖tᵢ − tⱼ‖²` so identical vectors give exactly zero.
pub fn within_motion_variance(embs: &[&[f64]]) -> Result<f64> {
    require_k(embs)?;
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..embs.len() {
        for j in 0..i {
            total += 0.5 * dist_sq(embs[i], embs[j]);
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `(1/K) Σ ‖tₖ − t̄‖²`
    pub lhs: f64,
    /// `((K−1)/K) · V`
    pub rhs: f64,
    pub abs_diff: f64,
}

pub fn var_text_identity(embs: &[&[f64]]) -> Result<IdentityCheck> {
    require_k(embs)?;
    let k = embs.len() as f64;
    let centroid = shifted_mean(embs);
    let lhs = embs.iter().map(|e| dist_sq(e, &centroid)).sum::<f64>() / k;
    let rhs = (k - 1.0) / k * within_motion_variance(embs)?;
    Ok(IdentityCheck {
        lhs,
        rhs,
        abs_diff: (lhs - rhs).abs(),
    })
}

fn caption_texts(ds: &Dataset, canonicalizer: Option<&Canonicalizer>) -> Result<Vec<String>> {
    match canonicalizer {
        None => Ok(ds.captions().iter().map(|c| c.text.clone()).collect()),
        Some(c) => c.canonicalize_all(ds.captions()),
    }
}

fn percent_delta(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (after - before) / before)
}

fn multi_caption_motions(ds: &Dataset) -> Vec<usize> {
    (0..ds.motions().len()).filter(|&m| ds.caption_indices(m).len() >= 2).collect()
}

fn rows<'a>(m: &'a Matrix, idx: &[usize]) -> Vec<&'a [f64]> {
    idx.iter().map(|&i| m.row(i)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPair {
    pub motion_id: String,
    pub original: f64,
    pub canonical: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub dataset: String,
    pub n_motions: usize,
    pub n_skipped: usize,
    pub mean_original: f64,
    pub mean_canonical: f64,
    pub percent_delta: Option<f64>,
    pub t_test: TTest,
    pub per_motion: Vec<MotionPair>,
}

impl VarianceReport {
    pub const CSV_HEADER: &'static str = "dataset,n,original,canonical,delta_pct,t,p";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{},{:.6},{}",
            self.dataset,
            self.n_motions,
            self.mean_original,
            self.mean_canonical,
            fmt_opt(self.percent_delta),
            self.t_test.t,
            fmt_opt(self.t_test.p_value)
        )
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// V(m) of every multi-caption motion under original and canonical text,
/// with a paired t-test over the per-motion values.
pub fn variance_report(ckpt: &Checkpoint, ds: &Dataset, canonicalizer: &Canonicalizer) -> Result<VarianceReport> {
    let enc = Encoder::from_checkpoint(ckpt);
    let e_orig = enc.texts(&caption_texts(ds, None)?)?;
    let e_canon = enc.texts(&caption_texts(ds, Some(canonicalizer))?)?;
    let multi = multi_caption_motions(ds);
    let mut per_motion = Vec::with_capacity(multi.len());
    for &m in &multi {
        let idx = ds.caption_indices(m);
        per_motion.push(MotionPair {
            motion_id: ds.motions()[m].id.clone(),
            original: within_motion_variance(&rows(&e_orig, idx))?,
            canonical: within_motion_variance(&rows(&e_canon, idx))?,
        });
    }
    if per_motion.is_empty() {
        return Err(Error::validation("dataset", "no motion has two or more captions"));
    }
    let orig: Vec<f64> = per_motion.iter().map(|p| p.original).collect();
    let canon: Vec<f64> = per_motion.iter().map(|p| p.canonical).collect();
    let n = per_motion.len() as f64;
    let mean_original = orig.iter().sum::<f64>() / n;
    let mean_canonical = canon.iter().sum::<f64>() / n;
    Ok(VarianceReport {
        dataset: ds.name.clone(),
        n_motions: per_motion.len(),
        n_skipped: ds.motions().len() - per_motion.len(),
        mean_original,
        mean_canonical,
        percent_delta: percent_delta(mean_original, mean_canonical),
        t_test: paired_t_test(&orig, &canon),
        per_motion,
    })
}

/// Spread of one motion's per-caption gradients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSpread {
    /// `(1/K) Σ ‖gₖ − ḡ‖²`
    pub variance: f64,
    /// Mean angle between each `gₖ` and `ḡ`, in degrees.
    pub cone_width_deg: f64,
    /// Mean pairwise cosine between gradients.
    pub pairwise_cosine: f64,
    /// Mean cosine between each gradient and the mean gradient.
    pub cosine_to_mean: f64,
}

pub fn gradient_spread(grads: &[&[f64]]) -> Result<GradientSpread> {
    require_k(grads)?;
    let k = grads.len() as f64;
    let mean = shifted_mean(grads);
    let variance = grads.iter().map(|g| dist_sq(g, &mean)).sum::<f64>() / k;
    let cone_width_deg = grads.iter().map(|g| angle(g, &mean).to_degrees()).sum::<f64>() / k;
    let cosine_to_mean = grads.iter().map(|g| cosine(g, &mean)).sum::<f64>() / k;
    let mut pair_sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..grads.len() {
        for j in 0..i {
            pair_sum += cosine(grads[i], grads[j]);
            pairs += 1;
        }
    }
    Ok(GradientSpread {
        variance,
        cone_width_deg,
        pairwise_cosine: pair_sum / pairs as f64,
        cosine_to_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradStats {
    pub sigma2: f64,
    pub cone_width_deg: f64,
    pub pairwise_cosine: f64,
    pub cosine_to_mean: f64,
}

impl GradStats {
    fn mean_of(spreads: &[GradientSpread]) -> Self {
        let n = spreads.len() as f64;
        let avg = |f: fn(&GradientSpread) -> f64| spreads.iter().map(f).sum::<f64>() / n;
        Self {
            sigma2: avg(|s| s.variance),
            cone_width_deg: avg(|s| s.cone_width_deg),
            pairwise_cosine: avg(|s| s.pairwise_cosine),
            cosine_to_mean: avg(|s| s.cosine_to_mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradVarReport {
    pub n_motions: usize,
    pub n_skipped: usize,
    pub original: GradStats,
    pub canonical: GradStats,
    pub percent_delta: Option<f64>,
    /// Fraction of motions whose canonical σ² is strictly below the original.
    pub fraction_reduced: f64,
    pub per_motion: Vec<MotionPair>,
}

impl GradVarReport {
    pub const CSV_HEADER: &'static str =
        "n,sigma2_original,sigma2_canonical,delta_pct,fraction_reduced,cone_original,cone_canonical,consistency_original,consistency_canonical";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{},{:.4},{:.4},{:.4},{:.6},{:.6}",
            self.n_motions,
            self.original.sigma2,
            self.canonical.sigma2,
            fmt_opt(self.percent_delta),
            self.fraction_reduced,
            self.original.cone_width_deg,
            self.canonical.cone_width_deg,
            self.original.pairwise_cosine,
            self.canonical.pairwise_cosine
        )
    }
}

/// Per-motion spread of the text-query InfoNCE gradient `(c − M₊)/τ`
/// against the fixed gallery of every motion in `ds`.
pub fn motion_gradient_spreads(ckpt: &Checkpoint, ds: &Dataset, texts: &[String]) -> Result<Vec<(usize, GradientSpread)>> {
    let enc = Encoder::from_checkpoint(ckpt);
    let e_text = enc.texts(texts)?;
    let e_motion = enc.motions(ds)?;
    let tau = ckpt.config.tau;
    multi_caption_motions(ds)
        .into_iter()
        .map(|m| {
            let grads: Vec<Vec<f64>> = ds
                .caption_indices(m)
                .iter()
                .map(|&i| query_gradient(e_text.row(i), &e_motion, m, tau))
                .collect();
            let refs: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
            Ok((m, gradient_spread(&refs)?))
        })
        .collect()
}

pub fn gradient_variance(ckpt: &Checkpoint, ds: &Dataset, canonicalizer: &Canonicalizer) -> Result<GradVarReport> {
    let orig = motion_gradient_spreads(ckpt, ds, &caption_texts(ds, None)?)?;
    let canon = motion_gradient_spreads(ckpt, ds, &caption_texts(ds, Some(canonicalizer))?)?;
    if orig.is_empty() {
        return Err(Error::validation("dataset", "no motion has two or more captions"));
    }
    let so: Vec<GradientSpread> = orig.iter().map(|(_, s)| *s).collect();
    let sc: Vec<GradientSpread> = canon.iter().map(|(_, s)| *s).collect();
    let original = GradStats::mean_of(&so);
    let canonical = GradStats::mean_of(&sc);
    let reduced = so.iter().zip(&sc).filter(|(o, c)| c.variance < o.variance).count();
    Ok(GradVarReport {
        n_motions: orig.len(),
        n_skipped: ds.motions().len() - orig.len(),
        original,
        canonical,
        percent_delta: percent_delta(original.sigma2, canonical.sigma2),
        fraction_reduced: reduced as f64 / orig.len() as f64,
        per_motion: orig
            .iter()
            .zip(&sc)
            .map(|((m, o), c)| MotionPair {
                motion_id: ds.motions()[*m].id.clone(),
                original: o.variance,
                canonical: c.variance,
            })
            .collect(),
    })
}

/// Spread of the training positive a strategy selects for each motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpread {
    pub n_motions: usize,
    /// Mean over motions of the selection-weighted `Σ wᵢ ‖gᵢ − ḡ‖²`.
    pub sigma2: f64,
    /// Mean number of distinct candidate texts per motion.
    pub mean_pool_size: f64,
}

/// Gradient spread of the text positive under the caption-selection rule of
/// training: each caption drawn with probability `1/K`, and replaced with
/// probability `paraphrase_rate` by one of its registered paraphrases chosen
/// uniformly. Without a registry this equals the original-caption σ². The
/// gallery is every motion of `ds`.
pub fn selection_spread(
    ckpt: &Checkpoint,
    ds: &Dataset,
    paraphrases: Option<&ParaphraseRegistry>,
    paraphrase_rate: f64,
) -> Result<SelectionSpread> {
    if !(0.0..=1.0).contains(&paraphrase_rate) {
        return Err(Error::validation("paraphrase_rate", "must lie in [0, 1]"));
    }
    let enc = Encoder::from_checkpoint(ckpt);
    let e_motion = enc.motions(ds)?;
    let tau = ckpt.config.tau;
    let mut total = 0.0;
    let mut pool_total = 0usize;
    let multi = multi_caption_motions(ds);
    if multi.is_empty() {
        return Err(Error::validation("dataset", "no motion has two or more captions"));
    }
    for &m in &multi {
        let caps: Vec<_> = ds.captions_of(m).collect();
        let k = caps.len() as f64;
        let mut pool: Vec<(String, f64)> = Vec::new();
        for c in &caps {
            let paras = paraphrases.and_then(|r| r.get(&c.id)).unwrap_or(&[]);
            if paras.is_empty() || paraphrase_rate == 0.0 {
                pool.push((c.text.clone(), 1.0 / k));
            } else {
                pool.push((c.text.clone(), (1.0 - paraphrase_rate) / k));
                let w = paraphrase_rate / (k * paras.len() as f64);
                pool.extend(paras.iter().map(|p| (p.clone(), w)));
            }
        }
        let grads: Vec<Vec<f64>> = pool
            .iter()
            .map(|(t, _)| Ok(query_gradient(&enc.text(t)?, &e_motion, m, tau)))
            .collect::<Result<_>>()?;
        let d = grads[0].len();
        let mut mean = vec![0.0; d];
        for (g, (_, w)) in grads.iter().zip(&pool) {
            for (a, x) in mean.iter_mut().zip(g) {
                *a += w * x;
            }
        }
        total += grads
            .iter()
            .zip(&pool)
            .map(|(g, (_, w))| w * dist_sq(g, &mean))
            .sum::<f64>();
        pool_total += pool.len();
    }
    let n = multi.len();
    Ok(SelectionSpread {
        n_motions: n,
        sigma2: total / n as f64,
        mean_pool_size: pool_total as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n_queries: usize,
    pub gallery_size: usize,
    pub mean_entropy: f64,
    pub mean_p_positive: f64,
}

impl ConcentrationReport {
    pub const CSV_HEADER: &'static str = "n,gallery,entropy,p_positive";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{:.4}",
            self.n_queries, self.gallery_size, self.mean_entropy, self.mean_p_positive
        )
    }
}

/// Shannon entropy (nats) of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Softmax concentration of caller-supplied text query embeddings over a
/// motion gallery; `positives[i]` is the gallery row paired with query `i`.
pub fn concentration_of(e_text: &Matrix, e_motion: &Matrix, positives: &[usize], tau: f64) -> Result<ConcentrationReport> {
    if positives.len() != e_text.rows() || positives.is_empty() {
        return Err(Error::Shape("one positive per query required".into()));
    }
    let mut logits = vec![0.0; e_motion.rows()];
    let (mut h, mut pp) = (0.0, 0.0);
    for (q, &pos) in positives.iter().enumerate() {
        for (l, m) in logits.iter_mut().zip(e_motion.iter_rows()) {
            *l = dot(e_text.row(q), m);
        }
        let p = softmax(&logits, tau);
        h += entropy(&p);
        pp += p[pos];
    }
    let n = positives.len() as f64;
    Ok(ConcentrationReport {
        n_queries: positives.len(),
        gallery_size: e_motion.rows(),
        mean_entropy: h / n,
        mean_p_positive: pp / n,
    })
}

/// Every caption of `ds` as a query against all motions of `ds` at the
/// checkpoint's temperature. With a canonicalizer the queries are the
/// canonical captions.
pub fn concentration(ckpt: &Checkpoint, ds: &Dataset, canonicalizer: Option<&Canonicalizer>) -> Result<ConcentrationReport> {
    let enc = Encoder::from_checkpoint(ckpt);
    let e_text = enc.texts(&caption_texts(ds, canonicalizer)?)?;
    let e_motion = enc.motions(ds)?;
    concentration_of(&e_text, &e_motion, &ds.motion_of_caption(), ckpt.config.tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub n_multi_caption: usize,
    pub intra: f64,
    pub align: f64,
    pub inter_nn: f64,
    pub sep_ratio: f64,
}

impl GeometryReport {
    pub const CSV_HEADER: &'static str = "n,intra,align,inter_nn,sep";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{:.4},{:.4},{:.4}",
            self.n_multi_caption, self.intra, self.align, self.inter_nn, self.sep_ratio
        )
    }
}

/// Geometry of unit text and motion embeddings aligned with `ds`.
pub fn geometry_of(ds: &Dataset, e_text: &Matrix, e_motion: &Matrix) -> Result<GeometryReport> {
    let owner = ds.motion_of_caption();
    let multi = multi_caption_motions(ds);
    if multi.is_empty() {
        return Err(Error::validation("dataset", "no motion has two or more captions"));
    }
    let intra = multi
        .iter()
        .map(|&m| 1.0 - within_motion_variance(&rows(e_text, ds.caption_indices(m))).expect("k >= 2"))
        .sum::<f64>()
        / multi.len() as f64;
    let n = owner.len();
    let align = (0..n).map(|i| dot(e_text.row(i), e_motion.row(owner[i]))).sum::<f64>() / n as f64;
    let mut nn_sum = 0.0;
    let mut nn_count = 0usize;
    for i in 0..n {
        let best = (0..n)
            .filter(|&j| owner[j] != owner[i])
            .map(|j| unit_cosine(e_text.row(i), e_text.row(j)))
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_finite() {
            nn_sum += best;
            nn_count += 1;
        }
    }
    if nn_count == 0 {
        return Err(Error::validation("dataset", "needs captions from at least two motions"));
    }
    let inter_nn = nn_sum / nn_count as f64;
    Ok(GeometryReport {
        n_multi_caption: multi.len(),
        intra,
        align,
        inter_nn,
        sep_ratio: intra / inter_nn,
    })
}

pub fn geometry(ckpt: &Checkpoint, ds: &Dataset, canonicalizer: Option<&Canonicalizer>) -> Result<GeometryReport> {
    let enc = Encoder::from_checkpoint(ckpt);
    let e_text = enc.texts(&caption_texts(ds, canonicalizer)?)?;
    let e_motion = enc.motions(ds)?;
    geometry_of(ds, &e_text, &e_motion)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub n_pairs: usize,
    pub mean_original: f64,
    pub mean_canonical: f64,
    pub percent_delta: Option<f64>,
}

impl AlignmentReport {
    pub const CSV_HEADER: &'static str = "n_pairs,original,canonical,delta_pct";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.4},{:.4},{}",
            self.n_pairs,
            self.mean_original,
            self.mean_canonical,
            fmt_opt(self.percent_delta)
        )
    }
}

fn mean_cross_cosine(
    pairs: &[(usize, usize)],
    a: &Dataset,
    b: &Dataset,
    ea: &Matrix,
    eb: &Matrix,
) -> f64 {
    let per_pair = pairs.iter().map(|&(ma, mb)| {
        let (ia, ib) = (a.caption_indices(ma), b.caption_indices(mb));
        let total: f64 = ia
            .iter()
            .flat_map(|&i| ib.iter().map(move |&j| (i, j)))
            .map(|(i, j)| unit_cosine(ea.row(i), eb.row(j)))
            .sum();
        total / (ia.len() * ib.len()) as f64
    });
    per_pair.sum::<f64>() / pairs.len() as f64
}

/// Mean caption-embedding cosine across matched motions of two datasets,
/// before and after canonicalization. `pairs` hold motion ids of `a` and `b`.
pub fn cross_alignment(
    ckpt: &Checkpoint,
    pairs: &[(String, String)],
    a: &Dataset,
    b: &Dataset,
    canonicalizer: &Canonicalizer,
) -> Result<AlignmentReport> {
    if pairs.is_empty() {
        return Err(Error::validation("pairs", "no matched motions"));
    }
    let idx: Vec<(usize, usize)> = pairs
        .iter()
        .map(|(x, y)| match (a.motion_index(x), b.motion_index(y)) {
            (Some(i), Some(j)) => Ok((i, j)),
            _ => Err(Error::Integrity(format!("unknown matched pair ({x}, {y})"))),
        })
        .collect::<Result<_>>()?;
    let enc = Encoder::from_checkpoint(ckpt);
    let embed = |ds: &Dataset, c: Option<&Canonicalizer>| -> Result<Matrix> { enc.texts(&caption_texts(ds, c)?) };
    let mean_original = mean_cross_cosine(&idx, a, b, &embed(a, None)?, &embed(b, None)?);
    let mean_canonical = mean_cross_cosine(
        &idx,
        a,
        b,
        &embed(a, Some(canonicalizer))?,
        &embed(b, Some(canonicalizer))?,
    );
    Ok(AlignmentReport {
        n_pairs: idx.len(),
        mean_original,
        mean_canonical,
        percent_delta: percent_delta(mean_original, mean_canonical),
    })
}
