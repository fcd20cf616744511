use std::path::{Path, PathBuf};

use canonlab_core::canon::{CanonCache, Canonicalizer, Category, EndpointConfig, WordLists, DEFAULT_STRIP};
use canonlab_core::corpus::{Split, SynthSpec};
use canonlab_core::eval::{Protocol, TextMode};
use canonlab_core::lingstats::DEFAULT_BENIGNITY_THRESHOLDS;
use canonlab_core::model::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const ENDPOINT_ENV: &str = "MOCHA_CANON_ENDPOINT";

/// One experiment run, parsed from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Overrides every seed in the file when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonicalizer: Option<CanonConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ling: Option<LingConfig>,
}

/// Dataset source: a JSONL file or an in-config synthetic generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthSpec>,
    /// Paraphrase registry file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrases: Option<PathBuf>,
    /// Paraphrases to generate per caption for a synthetic dataset.
    #[serde(default)]
    pub paraphrase_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSel {
    Train,
    Val,
    Test,
    All,
}

impl SplitSel {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitSel::Train => Some(Split::Train),
            SplitSel::Val => Some(Split::Val),
            SplitSel::Test => Some(Split::Test),
            SplitSel::All => None,
        }
    }
}

fn default_test() -> SplitSel {
    SplitSel::Test
}

fn default_all() -> SplitSel {
    SplitSel::All
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CanonConfig {
    Identity,
    Stopword {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        strip: Option<Vec<Category>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        wordlists_dir: Option<PathBuf>,
    },
    Oracle,
    Cached {
        cache: PathBuf,
    },
    Remote {
        url: String,
        cache: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_ms: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_retries: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        batch_size: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub checkpoint: PathBuf,
    pub protocol: Protocol,
    pub text_mode: TextMode,
    #[serde(default = "default_test")]
    pub split: SplitSel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub checkpoint: PathBuf,
    #[serde(default = "default_test")]
    pub split: SplitSel,
    /// Second dataset paired by external key for cross-alignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_with: Option<PathBuf>,
}

fn default_top_k() -> usize {
    5
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_BENIGNITY_THRESHOLDS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LingConfig {
    #[serde(default = "default_all")]
    pub split: SplitSel,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_provider: Option<canonlab_core::eval::SimProvider>,
    /// Baseline and treatment T2M report files for the length analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treat_report: Option<PathBuf>,
}

impl Default for LingConfig {
    fn default() -> Self {
        Self {
            split: SplitSel::All,
            top_k: default_top_k(),
            thresholds: default_thresholds(),
            sim_provider: None,
            base_report: None,
            treat_report: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(body: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(body).map_err(|e| CliError::config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "schema_version: expected {SCHEMA_VERSION}, found {}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&body)
    }

    /// Makes every relative input path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.data.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.paraphrases.as_mut() {
            fix(p);
        }
        match self.canonicalizer.as_mut() {
            Some(CanonConfig::Cached { cache }) | Some(CanonConfig::Remote { cache, .. }) => fix(cache),
            Some(CanonConfig::Stopword {
                wordlists_dir: Some(d), ..
            }) => fix(d),
            _ => {}
        }
        if let Some(e) = self.eval.as_mut() {
            fix(&mut e.checkpoint);
            if let Some(canonlab_core::eval::SimProvider::Precomputed { path }) = e.protocol.sim_provider.as_mut() {
                fix(path);
            }
        }
        if let Some(n) = self.noise.as_mut() {
            fix(&mut n.checkpoint);
            if let Some(p) = n.pair_with.as_mut() {
                fix(p);
            }
        }
        if let Some(l) = self.ling.as_mut() {
            for p in [l.base_report.as_mut(), l.treat_report.as_mut()].into_iter().flatten() {
                fix(p);
            }
            if let Some(canonlab_core::eval::SimProvider::Precomputed { path }) = l.sim_provider.as_mut() {
                fix(path);
            }
        }
        if let Some(o) = self.out.as_mut() {
            fix(o);
        }
    }

    /// Applies a seed to the run and every seeded block.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        if let Some(s) = self.data.synth.as_mut() {
            s.seed = seed;
        }
        if let Some(t) = self.train.as_mut() {
            t.seed = seed;
        }
    }

    /// Structural checks shared by all commands.
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.data.path, &self.data.synth) {
            (Some(_), Some(_)) => return Err(CliError::config("data: give either path or synth, not both")),
            (None, None) => return Err(CliError::config("data: one of path or synth is required")),
            (None, Some(s)) => s.validate().map_err(CliError::from)?,
            _ => {}
        }
        if self.data.paraphrase_count > 0 && self.data.synth.is_none() {
            return Err(CliError::config("data.paraphrase_count: only valid with a synthetic dataset"));
        }
        if let Some(t) = &self.train {
            t.validate().map_err(CliError::from)?;
        }
        if let Some(e) = &self.eval {
            e.protocol.validate().map_err(CliError::from)?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

impl CanonConfig {
    pub fn build(&self) -> Result<Canonicalizer, CliError> {
        Ok(match self {
            CanonConfig::Identity => Canonicalizer::Identity,
            CanonConfig::Oracle => Canonicalizer::Oracle,
            CanonConfig::Stopword { strip, wordlists_dir } => Canonicalizer::Stopword {
                wordlists: match wordlists_dir {
                    Some(d) => WordLists::from_dir(d).map_err(CliError::from)?,
                    None => WordLists::builtin(),
                },
                strip: strip.clone().unwrap_or_else(|| DEFAULT_STRIP.to_vec()),
            },
            CanonConfig::Cached { cache } => Canonicalizer::Cached {
                cache: CanonCache::open(cache).map_err(CliError::from)?,
            },
            CanonConfig::Remote {
                url,
                cache,
                timeout_ms,
                max_retries,
                batch_size,
            } => {
                let url = std::env::var(ENDPOINT_ENV).unwrap_or_else(|_| url.clone());
                let mut endpoint = EndpointConfig::new(url);
                if let Some(t) = timeout_ms {
                    endpoint.timeout_ms = *t;
                }
                if let Some(r) = max_retries {
                    endpoint.max_retries = *r;
                }
                if let Some(b) = batch_size {
                    endpoint.batch_size = *b;
                }
                Canonicalizer::Remote {
                    endpoint,
                    cache: CanonCache::open(cache).map_err(CliError::from)?,
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1

[data.synth]
n_motions = 20
seed = 7
"#;

    #[test]
    fn minimal_config_parses() {
        let c = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.data.synth.as_ref().unwrap().n_motions, 20);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let body = format!("{MINIMAL}\nbogus = 1\n");
        let e = RunConfig::from_toml_str(&body).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let body = MINIMAL.replace("seed = 7", "seed = 7\nstyle = 0.1");
        assert!(RunConfig::from_toml_str(&body).is_err());
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let body = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(RunConfig::from_toml_str(&body).unwrap_err().to_string().contains("schema_version"));
    }

    #[test]
    fn invalid_probability_names_field() {
        let body = MINIMAL.replace("seed = 7", "seed = 7\nstyle_rate = 1.5");
        let c = RunConfig::from_toml_str(&body).unwrap();
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("style_rate"), "{e}");
    }

    #[test]
    fn hash_ignores_out_but_tracks_seed() {
        let a = RunConfig::from_toml_str(MINIMAL).unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.apply_seed(8);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(b.data.synth.unwrap().seed, 8);
    }

    #[test]
    fn canonicalizer_blocks_parse() {
        let body = format!("{MINIMAL}\n[canonicalizer]\nkind = \"stopword\"\nstrip = [\"determiners\"]\n");
        let c = RunConfig::from_toml_str(&body).unwrap();
        assert!(matches!(c.canonicalizer, Some(CanonConfig::Stopword { .. })));
        let body = format!("{MINIMAL}\n[canonicalizer]\nkind = \"remote\"\nurl = \"http://x\"\ncache = \"c.jsonl\"\n");
        assert!(RunConfig::from_toml_str(&body).is_ok());
        let body = format!("{MINIMAL}\n[canonicalizer]\nkind = \"magic\"\n");
        assert!(RunConfig::from_toml_str(&body).is_err());
    }
}
