//! Central-difference verification of the analytic encoder gradients.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderParams, ParamGrads};
use super::train::{batch_texts, initial_checkpoint, pass_gradient, pick_captions, Prepared, TrainConfig, TrainInputs, TrainMode};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-6;
/// Lower bound on the relative-error denominator, so entries whose true
/// gradient is numerically zero are judged on absolute error.
pub const FD_REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub mode: TrainMode,
    pub n_probes: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Copy)]
enum Probe {
    Text(usize, usize),
    Motion(usize, usize),
}

fn get(p: &EncoderParams, probe: Probe) -> f64 {
    match probe {
        Probe::Text(r, c) => p.text.get(r, c),
        Probe::Motion(r, c) => p.motion.get(r, c),
    }
}

fn set(p: &mut EncoderParams, probe: Probe, v: f64) {
    match probe {
        Probe::Text(r, c) => p.text.set(r, c, v),
        Probe::Motion(r, c) => p.motion.set(r, c, v),
    }
}

fn grad_at(g: &ParamGrads, probe: Probe) -> f64 {
    match probe {
        Probe::Text(r, c) => g.text.get(r, c),
        Probe::Motion(r, c) => g.motion.get(r, c),
    }
}

/// Compares the analytic gradient of the mode's weighted composite loss on
/// one batch (the first `batch_size` train motions) against central
/// differences at `n_probes` randomly chosen weights, half in the text rows
/// touched by the batch and half in the motion encoder.
pub fn finite_diff_check(cfg: &TrainConfig, inputs: &TrainInputs, n_probes: usize) -> Result<GradCheckReport> {
    if n_probes == 0 {
        return Err(Error::validation("n_probes", "must be positive"));
    }
    let ckpt = initial_checkpoint(cfg, inputs.ds, None)?;
    let prep = Prepared::new(cfg, inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6772_6164);
    let n = prep.motions.len().min(cfg.batch_size);
    let chunk: Vec<usize> = (0..n).collect();
    let picks = pick_captions(cfg, &prep, &chunk, &mut rng);
    let motions: Vec<&[f64]> = picks.iter().map(|p| prep.motions[p.motion].as_slice()).collect();
    let passes: Vec<_> = cfg
        .passes()
        .into_iter()
        .map(|(src, w)| (batch_texts(&prep, &picks, src), w))
        .collect();

    let composite = |params: &EncoderParams| -> Result<(f64, ParamGrads)> {
        let mut total = 0.0;
        let mut grads = ParamGrads::zeros_like(params);
        for (texts, w) in &passes {
            let (l, g) = pass_gradient(params, texts, &motions, cfg.tau)?;
            total += w * l;
            grads.text.sub_scaled(&g.text, -w);
            grads.motion.sub_scaled(&g.motion, -w);
        }
        Ok((total, grads))
    };

    let mut params = ckpt.params;
    let (_, analytic) = composite(&params)?;

    let mut rows: Vec<usize> = passes
        .iter()
        .flat_map(|(texts, _)| texts.iter().flat_map(|v| v.iter().map(|&(j, _)| j)))
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let d = params.embed_dim();
    let probes: Vec<Probe> = (0..n_probes)
        .map(|i| {
            if i % 2 == 0 {
                let r = *rows.choose(&mut rng).expect("batch has tokens");
                Probe::Text(r, rng.random_range(0..d))
            } else {
                Probe::Motion(rng.random_range(0..params.motion.rows()), rng.random_range(0..d))
            }
        })
        .collect();

    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for probe in probes {
        let x0 = get(&params, probe);
        set(&mut params, probe, x0 + FD_STEP);
        let (lp, _) = composite(&params)?;
        set(&mut params, probe, x0 - FD_STEP);
        let (lm, _) = composite(&params)?;
        set(&mut params, probe, x0);
        let numeric = (lp - lm) / (2.0 * FD_STEP);
        let a = grad_at(&analytic, probe);
        let abs = (a - numeric).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / a.abs().max(numeric.abs()).max(FD_REL_FLOOR));
    }
    Ok(GradCheckReport {
        mode: cfg.mode,
        n_probes,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::Canonicalizer;
    use crate::corpus::{generate_paraphrases, generate_synthetic, SynthSpec};
    use crate::model::HashedFeaturizer;

    #[test]
    fn all_modes_pass_on_small_batch() {
        let mut spec = SynthSpec::new(8, 11);
        spec.val_fraction = 0.0;
        spec.test_fraction = 0.0;
        spec.motion_dim = 12;
        let ds = generate_synthetic(&spec).unwrap();
        let reg = generate_paraphrases(&ds, &spec, 2, 3);
        let canon = Canonicalizer::Oracle;
        let inputs = TrainInputs::new(&ds).with_canonicalizer(&canon).with_paraphrases(&reg);
        for mode in [
            TrainMode::Baseline,
            TrainMode::CanonicalOnly,
            TrainMode::Blend,
            TrainMode::BlendRev,
            TrainMode::ParaphraseSub,
        ] {
            let cfg = TrainConfig {
                embed_dim: 16,
                batch_size: 8,
                featurizer: HashedFeaturizer::new(64, 0).unwrap(),
                paraphrase_rate: 0.5,
                ..TrainConfig::new(mode)
            };
            let r = finite_diff_check(&cfg, &inputs, 60).unwrap();
            assert!(r.max_rel_error <= 1e-5, "{r:?}");
        }
    }
}
