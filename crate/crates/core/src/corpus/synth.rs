//! Synthetic corpus whose captions are rendered from known latent atoms plus
//! independent per-annotator nuisance insertions.
//!
//! Two independent random streams drive generation: the content stream
//! (atoms, motion features, splits) seeded by `seed`, and the nuisance stream
//! (style and hallucination insertions) seeded by `nuisance_seed` or, when
//! absent, by `seed`. Two specs that share `seed` therefore describe the same
//! motions, and differ only in how they are captioned.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use siphasher::sip::SipHasher13;
use std::hash::Hasher;

use super::{Atom, Caption, CaptionSource, Dataset, LatentAtoms, Motion, ParaphraseRegistry, Split};
use crate::canon::oracle::atom_tokens;
use crate::error::{Error, Result};

/// Vocabularies used by the generator.
pub mod vocab {
    pub const VERBS: &[&str] = &[
        "walk", "run", "jump", "turn", "raise", "kick", "wave", "step", "crouch", "spin", "throw",
        "punch", "lift", "stretch", "bend", "sit", "stand", "dance", "climb", "hop", "squat",
        "reach", "swing", "clap", "wipe", "push", "pull", "jog", "kneel", "lean", "shake",
        "rotate", "stop",
    ];
    pub const DIRECTIONS: &[&str] = &[
        "forward", "backward", "left", "right", "around", "up", "down", "sideways", "clockwise",
        "counterclockwise", "diagonally",
    ];
    pub const LIMBS: &[&str] = &[
        "right arm", "left arm", "right leg", "left leg", "right hand", "left hand",
        "both hands", "head", "right foot", "left foot",
    ];
    pub const OBJECTS: &[&str] = &["ball", "box", "cloth", "chair", "item", "bottle", "rope", "stick"];

    // Annotator style (a).
    pub const SUBJECTS: &[&str] = &[
        "a person", "the person", "a man", "the man", "a woman", "someone", "a figure",
        "the figure", "he", "she",
    ];
    pub const HEDGES: &[&str] = &["seems to", "appears to", "kind of", "sort of", "maybe", "probably"];
    pub const CONNECTORS: &[&str] = &["then", "and then", "after that", "next", "and", "finally"];
    pub const FILLERS: &[&str] = &["just", "basically", "actually", "really", "simply"];

    // Hallucinated, motion-irrecoverable content (h).
    pub const EMOTIONS: &[&str] = &[
        "nervously", "happily", "angrily", "sadly", "excitedly", "proudly", "anxiously",
        "confidently",
    ];
    pub const INTENTS: &[&str] = &[
        "to greet a friend", "to answer the phone", "to find a cup", "to avoid a puddle",
        "as if being followed", "for exercise", "while waiting for the bus", "to impress someone",
    ];
    pub const HALLUC_OBJECTS: &[&str] = &["holding a cup", "with a bag", "wearing a hat", "holding a phone"];
}

const DIRECTION_RATE: f64 = 0.6;
const LIMB_RATE: f64 = 0.3;
const OBJECT_RATE: f64 = 0.2;
const REPETITION_RATE: f64 = 0.15;

fn default_k() -> usize {
    3
}
fn default_atom_min() -> usize {
    1
}
fn default_atom_max() -> usize {
    3
}
fn default_verbs() -> usize {
    20
}
fn default_directions() -> usize {
    8
}
fn default_limbs() -> usize {
    8
}
fn default_objects() -> usize {
    6
}
fn default_style() -> f64 {
    0.6
}
fn default_halluc() -> f64 {
    0.3
}
fn default_motion_dim() -> usize {
    64
}
fn default_noise() -> f64 {
    0.05
}
fn default_val() -> f64 {
    0.1
}
fn default_test() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_motions: usize,
    #[serde(default = "default_k")]
    pub k_captions: usize,
    #[serde(default = "default_atom_min")]
    pub atom_min: usize,
    #[serde(default = "default_atom_max")]
    pub atom_max: usize,
    #[serde(default = "default_verbs")]
    pub n_verbs: usize,
    #[serde(default = "default_directions")]
    pub n_directions: usize,
    #[serde(default = "default_limbs")]
    pub n_limbs: usize,
    #[serde(default = "default_objects")]
    pub n_objects: usize,
    #[serde(default = "default_style")]
    pub style_rate: f64,
    #[serde(default = "default_halluc")]
    pub halluc_rate: f64,
    #[serde(default = "default_motion_dim")]
    pub motion_dim: usize,
    #[serde(default = "default_noise")]
    pub motion_noise_sd: f64,
    pub seed: u64,
    #[serde(default)]
    pub nuisance_seed: Option<u64>,
    #[serde(default = "default_val")]
    pub val_fraction: f64,
    #[serde(default = "default_test")]
    pub test_fraction: f64,
}

impl SynthSpec {
    pub fn new(n_motions: usize, seed: u64) -> Self {
        Self {
            n_motions,
            k_captions: default_k(),
            atom_min: default_atom_min(),
            atom_max: default_atom_max(),
            n_verbs: default_verbs(),
            n_directions: default_directions(),
            n_limbs: default_limbs(),
            n_objects: default_objects(),
            style_rate: default_style(),
            halluc_rate: default_halluc(),
            motion_dim: default_motion_dim(),
            motion_noise_sd: default_noise(),
            seed,
            nuisance_seed: None,
            val_fraction: default_val(),
            test_fraction: default_test(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::validation(name, format!("{v} is not a probability")))
            }
        };
        prob("style_rate", self.style_rate)?;
        prob("halluc_rate", self.halluc_rate)?;
        prob("val_fraction", self.val_fraction)?;
        prob("test_fraction", self.test_fraction)?;
        if self.val_fraction + self.test_fraction > 1.0 {
            return Err(Error::validation("test_fraction", "val + test fractions exceed 1"));
        }
        if self.n_motions < 1 {
            return Err(Error::validation("n_motions", "must be at least 1"));
        }
        if self.k_captions < 2 {
            return Err(Error::validation("k_captions", "must be at least 2"));
        }
        if !(1..=4).contains(&self.atom_min) || !(self.atom_min..=4).contains(&self.atom_max) {
            return Err(Error::validation(
                "atom_min",
                format!("atom range {}..={} must lie in 1..=4", self.atom_min, self.atom_max),
            ));
        }
        let sized = |name: &str, n: usize, max: usize| {
            if (1..=max).contains(&n) {
                Ok(())
            } else {
                Err(Error::validation(name, format!("{n} not in 1..={max}")))
            }
        };
        sized("n_verbs", self.n_verbs, vocab::VERBS.len())?;
        sized("n_directions", self.n_directions, vocab::DIRECTIONS.len())?;
        sized("n_limbs", self.n_limbs, vocab::LIMBS.len())?;
        sized("n_objects", self.n_objects, vocab::OBJECTS.len())?;
        if self.motion_dim < 1 {
            return Err(Error::validation("motion_dim", "must be at least 1"));
        }
        if !(self.motion_noise_sd >= 0.0 && self.motion_noise_sd.is_finite()) {
            return Err(Error::validation("motion_noise_sd", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

fn nuisance_rng(spec: &SynthSpec) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.nuisance_seed.unwrap_or(spec.seed));
    rng.set_stream(1);
    rng
}

fn draw_atom(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Atom {
    let mut atom = Atom::verb(vocab::VERBS[..spec.n_verbs].choose(rng).unwrap());
    if rng.random::<f64>() < DIRECTION_RATE {
        atom.direction = Some(vocab::DIRECTIONS[..spec.n_directions].choose(rng).unwrap().to_string());
    }
    if rng.random::<f64>() < LIMB_RATE {
        atom.limb = Some(vocab::LIMBS[..spec.n_limbs].choose(rng).unwrap().to_string());
    }
    if rng.random::<f64>() < OBJECT_RATE {
        atom.object = Some(vocab::OBJECTS[..spec.n_objects].choose(rng).unwrap().to_string());
    }
    if rng.random::<f64>() < REPETITION_RATE {
        atom.repetition = Some(rng.random_range(2..=3));
    }
    atom
}

/// Fixed unit vector for one slot value, independent of the corpus seed.
fn slot_vector(slot: &str, value: &str, dim: usize) -> Vec<f64> {
    let mut h = SipHasher13::new_with_keys(0x6d6f_7469_6f6e, 0x736c_6f74);
    h.write(slot.as_bytes());
    h.write_u8(0);
    h.write(value.as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(h.finish());
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    crate::linalg::normalize(&mut v);
    v
}

fn atom_embedding(atom: &Atom, dim: usize) -> Vec<f64> {
    let mut v = slot_vector("verb", &atom.verb, dim);
    let mut add = |slot: &str, value: &str| {
        for (a, b) in v.iter_mut().zip(slot_vector(slot, value, dim)) {
            *a += b;
        }
    };
    if let Some(d) = &atom.direction {
        add("direction", d);
    }
    if let Some(l) = &atom.limb {
        add("limb", l);
    }
    if let Some(o) = &atom.object {
        add("object", o);
    }
    if let Some(r) = atom.repetition {
        add("repetition", &r.to_string());
    }
    v
}

fn motion_features(latents: &LatentAtoms, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let dim = spec.motion_dim;
    let mut v = vec![0.0; dim];
    for atom in &latents.atoms {
        for (a, b) in v.iter_mut().zip(atom_embedding(atom, dim)) {
            *a += b;
        }
    }
    crate::linalg::normalize(&mut v);
    for x in v.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x += spec.motion_noise_sd * z;
    }
    crate::linalg::normalize(&mut v);
    v
}

fn push_words(out: &mut Vec<String>, phrase: &str) {
    out.extend(phrase.split_whitespace().map(str::to_owned));
}

/// Renders one caption: the canonical atom tokens in order, with style and
/// hallucination insertions around them. Atom tokens are never altered.
fn render_caption(latents: &LatentAtoms, style: f64, halluc: f64, rng: &mut ChaCha8Rng) -> String {
    let mut words = Vec::new();
    let maybe = |rng: &mut ChaCha8Rng, rate: f64, pool: &[&str], words: &mut Vec<String>| {
        // Always consume the coin so stream position does not depend on rates.
        let coin = rng.random::<f64>();
        let pick = pool.choose(rng).unwrap();
        if coin < rate {
            push_words(words, pick);
        }
    };
    maybe(rng, style, vocab::SUBJECTS, &mut words);
    maybe(rng, style, vocab::HEDGES, &mut words);
    for (i, atom) in latents.atoms.iter().enumerate() {
        if i > 0 {
            words.push("→".to_string());
            maybe(rng, style, vocab::CONNECTORS, &mut words);
        }
        let tokens = atom_tokens(atom);
        maybe(rng, style, vocab::FILLERS, &mut words);
        words.push(tokens[0].clone());
        if i == 0 {
            maybe(rng, halluc, vocab::EMOTIONS, &mut words);
        }
        words.extend(tokens[1..].iter().cloned());
        maybe(rng, halluc, vocab::HALLUC_OBJECTS, &mut words);
    }
    maybe(rng, halluc, vocab::INTENTS, &mut words);
    words.join(" ")
}

fn split_assignment(n: usize, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Split> {
    let n_test = (n as f64 * spec.test_fraction).round() as usize;
    let n_val = ((n as f64 * spec.val_fraction).round() as usize).min(n - n_test);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut splits = vec![Split::Train; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_test {
            splits[i] = Split::Test;
        } else if rank < n_test + n_val {
            splits[i] = Split::Val;
        }
    }
    splits
}

/// Generates a synthetic multi-caption corpus with ground-truth latents.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut content = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut nuisance = nuisance_rng(spec);

    let latents: Vec<LatentAtoms> = (0..spec.n_motions)
        .map(|_| {
            let n = content.random_range(spec.atom_min..=spec.atom_max);
            LatentAtoms::new((0..n).map(|_| draw_atom(spec, &mut content)).collect())
        })
        .collect();
    let features: Vec<Vec<f64>> = latents
        .iter()
        .map(|l| motion_features(l, spec, &mut content))
        .collect();
    let splits = split_assignment(spec.n_motions, spec, &mut content);

    let mut motions = Vec::with_capacity(spec.n_motions);
    let mut captions = Vec::with_capacity(spec.n_motions * spec.k_captions);
    for (i, ((lat, feat), split)) in latents.into_iter().zip(features).zip(splits).enumerate() {
        let id = format!("m{i:05}");
        for k in 0..spec.k_captions {
            captions.push(Caption {
                id: format!("{id}_c{k}"),
                motion_id: id.clone(),
                text: render_caption(&lat, spec.style_rate, spec.halluc_rate, &mut nuisance),
                source: CaptionSource::Original,
                latents: Some(lat.clone()),
            });
        }
        motions.push(Motion {
            id,
            features: feat,
            split,
            ext_key: Some(format!("synth-{}/{i:05}", spec.seed)),
        });
    }
    Dataset::new(format!("synth-{}", spec.seed), spec.motion_dim, motions, captions)
}

/// Paraphrases as fresh nuisance redraws of each caption's latents, using the
/// style and hallucination rates of `spec`. Captions without latents get none.
pub fn generate_paraphrases(
    ds: &Dataset,
    spec: &SynthSpec,
    per_caption: usize,
    seed: u64,
) -> ParaphraseRegistry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut reg = ParaphraseRegistry::default();
    for c in ds.captions() {
        if let Some(lat) = &c.latents {
            let paras = (0..per_caption)
                .map(|_| render_caption(lat, spec.style_rate, spec.halluc_rate, &mut rng))
                .collect();
            reg.insert(&c.id, paras);
        }
    }
    reg
}
