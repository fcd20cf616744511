//! SGD training of the dual encoders under the five text-supervision
//! strategies, with per-epoch checkpoints that resume bit-identically.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{backprop_params, encode_motion_batch, encode_text_batch, EncoderParams, ParamGrads};
use super::featurize::{HashedFeaturizer, SparseVec};
use super::loss::infonce_with_grad;
use crate::canon::{CanonKind, Canonicalizer};
use crate::corpus::{Dataset, ParaphraseRegistry, Split};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// One pass on original captions.
    Baseline,
    /// One pass on canonical captions.
    CanonicalOnly,
    /// Original pass weighted `1 − λ`, then canonical pass weighted `λ`.
    Blend,
    /// Canonical pass first, then the original pass.
    BlendRev,
    /// One pass where each caption is swapped for a registered paraphrase
    /// with probability `paraphrase_rate`.
    ParaphraseSub,
}

impl TrainMode {
    pub fn needs_canonicalizer(self) -> bool {
        matches!(self, TrainMode::CanonicalOnly | TrainMode::Blend | TrainMode::BlendRev)
    }
}

/// How the two passes of the blend modes update the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlendUpdate {
    /// A separate SGD step after each pass.
    #[default]
    Sequential,
    /// Both passes evaluated at the same weights, one combined step.
    Summed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    Original,
    Canonical,
}

fn d_lambda() -> f64 {
    0.5
}
fn d_tau() -> f64 {
    0.07
}
fn d_epochs() -> usize {
    50
}
fn d_batch() -> usize {
    128
}
fn d_lr() -> f64 {
    1e-3
}
fn d_mult() -> f64 {
    1.0
}
fn d_para() -> f64 {
    0.2
}
fn d_embed() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub mode: TrainMode,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub base_lr: f64,
    #[serde(default = "d_mult")]
    pub motion_lr_mult: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_para")]
    pub paraphrase_rate: f64,
    #[serde(default = "d_embed")]
    pub embed_dim: usize,
    #[serde(default)]
    pub featurizer: HashedFeaturizer,
    #[serde(default)]
    pub blend_update: BlendUpdate,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::new(TrainMode::Baseline)
    }
}

impl TrainConfig {
    pub fn new(mode: TrainMode) -> Self {
        Self {
            mode,
            lambda: d_lambda(),
            tau: d_tau(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            base_lr: d_lr(),
            motion_lr_mult: d_mult(),
            seed: 0,
            paraphrase_rate: d_para(),
            embed_dim: d_embed(),
            featurizer: HashedFeaturizer::default(),
            blend_update: BlendUpdate::Sequential,
        }
    }

    /// Motion encoder trained at a tenth of the text learning rate.
    pub fn h3d_profile(mode: TrainMode) -> Self {
        Self {
            motion_lr_mult: 0.1,
            ..Self::new(mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::validation("lambda", "must lie in [0, 1]"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::validation("tau", "must be positive"));
        }
        if self.batch_size < 2 {
            return Err(Error::validation("batch_size", "must be at least 2"));
        }
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::validation("base_lr", "must be finite and nonnegative"));
        }
        if !(self.motion_lr_mult >= 0.0 && self.motion_lr_mult.is_finite()) {
            return Err(Error::validation("motion_lr_mult", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.paraphrase_rate) {
            return Err(Error::validation("paraphrase_rate", "must lie in [0, 1]"));
        }
        if self.embed_dim < 1 {
            return Err(Error::validation("embed_dim", "must be at least 1"));
        }
        if self.featurizer.dim < 2 {
            return Err(Error::validation("featurizer.dim", "must be at least 2"));
        }
        Ok(())
    }

    /// Weighted text sources of one batch, in execution order.
    pub fn passes(&self) -> Vec<(TextSource, f64)> {
        match self.mode {
            TrainMode::Baseline | TrainMode::ParaphraseSub => vec![(TextSource::Original, 1.0)],
            TrainMode::CanonicalOnly => vec![(TextSource::Canonical, 1.0)],
            TrainMode::Blend => vec![
                (TextSource::Original, 1.0 - self.lambda),
                (TextSource::Canonical, self.lambda),
            ],
            TrainMode::BlendRev => vec![
                (TextSource::Canonical, self.lambda),
                (TextSource::Original, 1.0 - self.lambda),
            ],
        }
    }
}

/// Cosine-annealed learning rate for a 0-based step.
pub fn cosine_lr(step: usize, total_steps: usize, base_lr: f64) -> f64 {
    if total_steps == 0 {
        return base_lr;
    }
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps as f64).cos())
}

/// Serializable ChaCha8 position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: String,
    pub stream: u64,
    pub word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: hex::encode(rng.get_seed()),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let bad = |r: &str| Error::validation("checkpoint.rng", r.to_string());
        let bytes = hex::decode(&self.seed).map_err(|e| bad(&e.to_string()))?;
        let seed: [u8; 32] = bytes.try_into().map_err(|_| bad("seed must be 32 bytes"))?;
        let pos: u128 = self.word_pos.parse().map_err(|_| bad("word_pos"))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassLoss {
    pub text: TextSource,
    pub weight: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub step: usize,
    pub lr: f64,
    pub passes: Vec<PassLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub canonicalizer: Option<CanonKind>,
    pub params: EncoderParams,
    /// Number of completed epochs.
    pub epoch: usize,
    pub rng: RngState,
    pub history: Vec<BatchRecord>,
}

impl Checkpoint {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s).map_err(|e| Error::Schema {
            path: "<checkpoint>".into(),
            line: e.line(),
            reason: e.to_string(),
        })?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::validation(
                "format_version",
                format!("unsupported checkpoint version {}", ck.format_version),
            ));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&body).map_err(|e| match e {
            Error::Schema { line, reason, .. } => Error::Schema {
                path: path.to_path_buf(),
                line,
                reason,
            },
            other => other,
        })
    }

    /// Loss history as CSV: one row per batch, one loss column per pass in
    /// execution order.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,batch,step,lr");
        for (src, _) in self.config.passes() {
            out.push_str(match src {
                TextSource::Original => ",original_loss",
                TextSource::Canonical => ",canonical_loss",
            });
        }
        out.push('\n');
        for r in &self.history {
            out.push_str(&format!("{},{},{},{}", r.epoch, r.batch, r.step, r.lr));
            for p in &r.passes {
                out.push_str(&format!(",{}", p.loss));
            }
            out.push('\n');
        }
        out
    }
}

/// Everything training reads besides its configuration.
#[derive(Clone, Copy)]
pub struct TrainInputs<'a> {
    pub ds: &'a Dataset,
    pub canonicalizer: Option<&'a Canonicalizer>,
    pub paraphrases: Option<&'a ParaphraseRegistry>,
}

impl<'a> TrainInputs<'a> {
    pub fn new(ds: &'a Dataset) -> Self {
        Self {
            ds,
            canonicalizer: None,
            paraphrases: None,
        }
    }

    pub fn with_canonicalizer(mut self, c: &'a Canonicalizer) -> Self {
        self.canonicalizer = Some(c);
        self
    }

    pub fn with_paraphrases(mut self, p: &'a ParaphraseRegistry) -> Self {
        self.paraphrases = Some(p);
        self
    }
}

/// Featurized training split.
pub(crate) struct Prepared {
    /// Motion features of each train motion.
    pub motions: Vec<Vec<f64>>,
    /// Per train motion: original feature vectors of its captions.
    pub original: Vec<Vec<SparseVec>>,
    /// Per train motion: canonical feature vectors, parallel to `original`.
    pub canonical: Option<Vec<Vec<SparseVec>>>,
    /// Per train motion and caption: paraphrase feature vectors.
    pub paraphrases: Option<Vec<Vec<Vec<SparseVec>>>>,
}

impl Prepared {
    pub fn new(cfg: &TrainConfig, inputs: &TrainInputs) -> Result<Self> {
        let ds = inputs.ds;
        let fz = &cfg.featurizer;
        let train_idx: Vec<usize> = (0..ds.motions().len())
            .filter(|&i| ds.motions()[i].split == Split::Train)
            .collect();
        if train_idx.len() < 2 {
            return Err(Error::validation("dataset", "needs at least two train motions"));
        }
        let featurize = |text: &str, id: &str| {
            fz.featurize(text)
                .map_err(|_| Error::Integrity(format!("caption {id} has no tokens")))
        };
        let mut motions = Vec::with_capacity(train_idx.len());
        let mut original = Vec::with_capacity(train_idx.len());
        for &m in &train_idx {
            motions.push(ds.motions()[m].features.clone());
            original.push(
                ds.captions_of(m)
                    .map(|c| featurize(&c.text, &c.id))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let canonical = if cfg.mode.needs_canonicalizer() {
            let canon = inputs.canonicalizer.ok_or_else(|| {
                Error::validation("canonicalizer", format!("{:?} training needs a canonicalizer", cfg.mode))
            })?;
            let train_caps: Vec<_> = train_idx
                .iter()
                .flat_map(|&m| ds.captions_of(m).cloned())
                .collect();
            let texts = canon.canonicalize_all(&train_caps)?;
            let mut it = texts.iter().zip(&train_caps);
            let mut out = Vec::with_capacity(train_idx.len());
            for &m in &train_idx {
                let mut group = Vec::new();
                for _ in ds.caption_indices(m) {
                    let (t, c) = it.next().expect("one canonical per caption");
                    group.push(featurize(t, &c.id)?);
                }
                out.push(group);
            }
            Some(out)
        } else {
            None
        };
        let paraphrases = if cfg.mode == TrainMode::ParaphraseSub {
            let reg = inputs
                .paraphrases
                .ok_or_else(|| Error::validation("paraphrases", "paraphrase_sub training needs a registry"))?;
            let mut out = Vec::with_capacity(train_idx.len());
            for &m in &train_idx {
                let mut per_caption = Vec::new();
                for c in ds.captions_of(m) {
                    let feats = reg
                        .get(&c.id)
                        .unwrap_or(&[])
                        .iter()
                        .map(|p| featurize(p, &c.id))
                        .collect::<Result<Vec<_>>>()?;
                    per_caption.push(feats);
                }
                out.push(per_caption);
            }
            Some(out)
        } else {
            None
        };
        Ok(Self {
            motions,
            original,
            canonical,
            paraphrases,
        })
    }

    pub fn batches_per_epoch(&self, batch_size: usize) -> usize {
        self.motions.len().div_ceil(batch_size)
    }
}

/// The caption choice for one motion of a batch.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pick {
    pub motion: usize,
    pub caption: usize,
    pub paraphrase: Option<usize>,
}

/// Draws the per-motion caption (and optional paraphrase) for a batch.
pub(crate) fn pick_captions(
    cfg: &TrainConfig,
    prep: &Prepared,
    chunk: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<Pick> {
    chunk
        .iter()
        .map(|&m| {
            let k = rng.random_range(0..prep.original[m].len());
            let mut paraphrase = None;
            if let Some(paras) = &prep.paraphrases {
                let coin = rng.random::<f64>();
                let avail = paras[m][k].len();
                if coin < cfg.paraphrase_rate && avail > 0 {
                    paraphrase = Some(rng.random_range(0..avail));
                }
            }
            Pick {
                motion: m,
                caption: k,
                paraphrase,
            }
        })
        .collect()
}

pub(crate) fn batch_texts<'p>(prep: &'p Prepared, picks: &[Pick], source: TextSource) -> Vec<&'p SparseVec> {
    picks
        .iter()
        .map(|p| match source {
            TextSource::Canonical => &prep.canonical.as_ref().expect("canonical prepared")[p.motion][p.caption],
            TextSource::Original => match (p.paraphrase, &prep.paraphrases) {
                (Some(j), Some(paras)) => &paras[p.motion][p.caption][j],
                _ => &prep.original[p.motion][p.caption],
            },
        })
        .collect()
}

/// Loss and weight gradient of one InfoNCE pass.
pub(crate) fn pass_gradient(
    params: &EncoderParams,
    texts: &[&SparseVec],
    motions: &[&[f64]],
    tau: f64,
) -> Result<(f64, ParamGrads)> {
    let et = encode_text_batch(params, texts)?;
    let em = encode_motion_batch(params, motions)?;
    let (loss, gt, gm) = infonce_with_grad(&et.emb, &em.emb, tau)?;
    let mut grads = ParamGrads::zeros_like(params);
    backprop_params(texts, motions, &et, &em, &gt, &gm, &mut grads);
    Ok((loss, grads))
}

fn apply(params: &mut EncoderParams, grads: &ParamGrads, lr: f64, motion_mult: f64, weight: f64) {
    params.text.sub_scaled(&grads.text, lr * weight);
    params.motion.sub_scaled(&grads.motion, lr * motion_mult * weight);
}

/// Freshly initialized checkpoint at epoch 0.
pub fn initial_checkpoint(cfg: &TrainConfig, ds: &Dataset, canonicalizer: Option<CanonKind>) -> Result<Checkpoint> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = EncoderParams::init(cfg.featurizer.dim, ds.motion_dim(), cfg.embed_dim, &mut rng);
    Ok(Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config: cfg.clone(),
        canonicalizer,
        params,
        epoch: 0,
        rng: RngState::capture(&rng),
        history: Vec::new(),
    })
}

/// Trains from scratch for `cfg.epochs` epochs.
pub fn train(cfg: &TrainConfig, inputs: &TrainInputs) -> Result<Checkpoint> {
    let ckpt = initial_checkpoint(cfg, inputs.ds, inputs.canonicalizer.map(Canonicalizer::kind))?;
    train_from(ckpt, inputs, |_| Ok(()))
}

/// Continues training a checkpoint up to its configured epoch count,
/// invoking `on_epoch` after every completed epoch.
pub fn train_from(
    mut ckpt: Checkpoint,
    inputs: &TrainInputs,
    mut on_epoch: impl FnMut(&Checkpoint) -> Result<()>,
) -> Result<Checkpoint> {
    let cfg = ckpt.config.clone();
    cfg.validate()?;
    if ckpt.epoch >= cfg.epochs {
        return Ok(ckpt);
    }
    let prep = Prepared::new(&cfg, inputs)?;
    let mut rng = ckpt.rng.restore()?;
    let per_epoch = prep.batches_per_epoch(cfg.batch_size);
    let total_steps = cfg.epochs * per_epoch;
    let passes = cfg.passes();

    for epoch in ckpt.epoch..cfg.epochs {
        let mut order: Vec<usize> = (0..prep.motions.len()).collect();
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let step = epoch * per_epoch + b;
            let lr = cosine_lr(step, total_steps, cfg.base_lr);
            let picks = pick_captions(&cfg, &prep, chunk, &mut rng);
            let motions: Vec<&[f64]> = picks.iter().map(|p| prep.motions[p.motion].as_slice()).collect();
            let mut record = BatchRecord {
                epoch,
                batch: b,
                step,
                lr,
                passes: Vec::with_capacity(passes.len()),
            };
            match cfg.blend_update {
                BlendUpdate::Sequential => {
                    for &(src, w) in &passes {
                        let texts = batch_texts(&prep, &picks, src);
                        let (loss, g) = pass_gradient(&ckpt.params, &texts, &motions, cfg.tau)?;
                        apply(&mut ckpt.params, &g, lr, cfg.motion_lr_mult, w);
                        record.passes.push(PassLoss { text: src, weight: w, loss });
                    }
                }
                BlendUpdate::Summed => {
                    let mut pending = Vec::with_capacity(passes.len());
                    for &(src, w) in &passes {
                        let texts = batch_texts(&prep, &picks, src);
                        let (loss, g) = pass_gradient(&ckpt.params, &texts, &motions, cfg.tau)?;
                        record.passes.push(PassLoss { text: src, weight: w, loss });
                        pending.push((g, w));
                    }
                    for (g, w) in &pending {
                        apply(&mut ckpt.params, g, lr, cfg.motion_lr_mult, *w);
                    }
                }
            }
            if !ckpt.params.all_finite() {
                return Err(Error::Degenerate(format!("training diverged at step {step}")));
            }
            ckpt.history.push(record);
        }
        ckpt.epoch = epoch + 1;
        ckpt.rng = RngState::capture(&rng);
        on_epoch(&ckpt)?;
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_paraphrases, generate_synthetic, SynthSpec};

    fn small_ds(n: usize, seed: u64) -> Dataset {
        let mut spec = SynthSpec::new(n, seed);
        spec.val_fraction = 0.0;
        spec.test_fraction = 0.0;
        spec.motion_dim = 16;
        generate_synthetic(&spec).unwrap()
    }

    fn quick(mode: TrainMode) -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 16,
            embed_dim: 8,
            featurizer: HashedFeaturizer::new(128, 1).unwrap(),
            base_lr: 0.05,
            seed: 9,
            ..TrainConfig::new(mode)
        }
    }

    #[test]
    fn cosine_schedule() {
        assert_eq!(cosine_lr(0, 100, 0.1), 0.1);
        assert!((cosine_lr(50, 100, 0.1) - 0.05).abs() < 1e-15);
        let lrs: Vec<f64> = (0..100).map(|s| cosine_lr(s, 100, 1.0)).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_epochs_returns_initial_weights() {
        let ds = small_ds(20, 1);
        let cfg = TrainConfig { epochs: 0, ..quick(TrainMode::Baseline) };
        let ck = train(&cfg, &TrainInputs::new(&ds)).unwrap();
        assert!(ck.history.is_empty());
        assert_eq!(ck.epoch, 0);
        let init = initial_checkpoint(&cfg, &ds, None).unwrap();
        assert_eq!(ck.params, init.params);
    }

    #[test]
    fn blend_with_zero_lambda_tracks_baseline_bitwise() {
        let ds = small_ds(64, 2);
        let canon = Canonicalizer::Oracle;
        let base = train(&quick(TrainMode::Baseline), &TrainInputs::new(&ds)).unwrap();
        let cfg = TrainConfig { lambda: 0.0, ..quick(TrainMode::Blend) };
        let blend = train(&cfg, &TrainInputs::new(&ds).with_canonicalizer(&canon)).unwrap();
        assert_eq!(base.params, blend.params);
        assert_ne!(base.params, initial_checkpoint(&cfg, &ds, None).unwrap().params);
        assert_eq!(blend.history[0].passes.len(), 2);
    }

    #[test]
    fn deterministic_and_resumable() {
        let ds = small_ds(40, 3);
        let canon = Canonicalizer::Oracle;
        let inputs = TrainInputs::new(&ds).with_canonicalizer(&canon);
        let cfg = quick(TrainMode::BlendRev);
        let a = train(&cfg, &inputs).unwrap();
        let b = train(&cfg, &inputs).unwrap();
        assert_eq!(a.to_json_string(), b.to_json_string());

        let mut first = None;
        let init = initial_checkpoint(&cfg, &ds, Some(CanonKind::Oracle)).unwrap();
        let _ = train_from(init, &inputs, |ck| {
            if ck.epoch == 1 && first.is_none() {
                first = Some(ck.to_json_string());
            }
            Ok(())
        })
        .unwrap();
        let resumed = Checkpoint::from_json_str(&first.unwrap()).unwrap();
        assert_eq!(resumed.epoch, 1);
        let c = train_from(resumed, &inputs, |_| Ok(())).unwrap();
        assert_eq!(c.to_json_string(), a.to_json_string());
    }

    #[test]
    fn blend_rev_logs_canonical_first() {
        let ds = small_ds(20, 4);
        let canon = Canonicalizer::Oracle;
        let ck = train(&quick(TrainMode::BlendRev), &TrainInputs::new(&ds).with_canonicalizer(&canon)).unwrap();
        assert!(ck.loss_csv().starts_with("epoch,batch,step,lr,canonical_loss,original_loss\n"));
        assert_eq!(ck.history[0].passes[0].text, TextSource::Canonical);
    }

    #[test]
    fn training_reduces_loss() {
        let ds = small_ds(64, 5);
        let cfg = TrainConfig { epochs: 20, ..quick(TrainMode::Baseline) };
        let ck = train(&cfg, &TrainInputs::new(&ds)).unwrap();
        let first: f64 = ck.history[..4].iter().map(|r| r.passes[0].loss).sum();
        let last: f64 = ck.history[ck.history.len() - 4..].iter().map(|r| r.passes[0].loss).sum();
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn missing_cache_entry_aborts_with_caption_id() {
        let ds = small_ds(10, 6);
        let canon = Canonicalizer::Cached {
            cache: crate::canon::CanonCache::in_memory([(ds.captions()[0].text.clone(), "walk".to_string())]),
        };
        let err = train(&quick(TrainMode::CanonicalOnly), &TrainInputs::new(&ds).with_canonicalizer(&canon));
        match err {
            Err(Error::CacheMisses { caption_ids }) => assert!(caption_ids.contains(&ds.captions()[1].id)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn modes_require_their_inputs() {
        let ds = small_ds(10, 7);
        assert!(train(&quick(TrainMode::Blend), &TrainInputs::new(&ds)).is_err());
        assert!(train(&quick(TrainMode::ParaphraseSub), &TrainInputs::new(&ds)).is_err());
        let spec = SynthSpec::new(10, 7);
        let reg = generate_paraphrases(&ds, &spec, 3, 1);
        let ck = train(&quick(TrainMode::ParaphraseSub), &TrainInputs::new(&ds).with_paraphrases(&reg)).unwrap();
        assert_eq!(ck.epoch, 2);
    }

    #[test]
    fn summed_update_differs_from_sequential() {
        let ds = small_ds(32, 8);
        let canon = Canonicalizer::Oracle;
        let inputs = TrainInputs::new(&ds).with_canonicalizer(&canon);
        let seq = train(&quick(TrainMode::Blend), &inputs).unwrap();
        let cfg = TrainConfig { blend_update: BlendUpdate::Summed, ..quick(TrainMode::Blend) };
        let sum = train(&cfg, &inputs).unwrap();
        assert_ne!(seq.params, sum.params);
        assert_eq!(seq.history.len(), sum.history.len());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig { tau: 0.0, ..TrainConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Validation { field, .. }) if field == "tau"));
        let cfg = TrainConfig { batch_size: 1, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
