//! Client for a generic JSON canonicalization endpoint.
//!
//! Request: `POST {"prompt_id": "canon_v1", "captions": [...]}`.
//! Response: `{"canonicals": [...]}` of the same length. Any non-200 status
//! or a length mismatch is a protocol error; transport failures are retried.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::cache::CanonCache;
use crate::error::{Error, Result};

pub const PROMPT_ID: &str = "canon_v1";

/// Prompt text the endpoint is expected to apply for [`PROMPT_ID`].
pub const CANON_V1_PROMPT: &str = include_str!("../../assets/prompts/canon_v1.txt");

fn default_timeout() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub url: String,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            timeout_ms: default_timeout(),
            max_retries: default_retries(),
            batch_size: default_batch(),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    prompt_id: &'a str,
    captions: &'a [String],
}

#[derive(Deserialize)]
struct Response {
    canonicals: Vec<String>,
}

enum Failure {
    Transport(String),
    Protocol(String),
}

fn post_batch(agent: &ureq::Agent, cfg: &EndpointConfig, batch: &[String]) -> Result<Vec<String>, Failure> {
    let body = Request {
        prompt_id: PROMPT_ID,
        captions: batch,
    };
    let mut resp = agent
        .post(&cfg.url)
        .send_json(&body)
        .map_err(|e| Failure::Transport(e.to_string()))?;
    if resp.status().as_u16() != 200 {
        return Err(Failure::Protocol(format!("endpoint returned status {}", resp.status())));
    }
    let parsed: Response = resp
        .body_mut()
        .read_json()
        .map_err(|e| Failure::Protocol(format!("malformed response: {e}")))?;
    if parsed.canonicals.len() != batch.len() {
        return Err(Failure::Protocol(format!(
            "sent {} captions, received {} canonicals",
            batch.len(),
            parsed.canonicals.len()
        )));
    }
    Ok(parsed.canonicals)
}

/// Canonicalizes `texts` cache-first. Misses are deduplicated, sent in
/// batches of `cfg.batch_size`, and written through to the cache. Output
/// order matches input order.
pub fn canon_remote(cfg: &EndpointConfig, cache: &CanonCache, texts: &[String]) -> Result<Vec<String>> {
    let mut misses: BTreeSet<String> = BTreeSet::new();
    for t in texts {
        if cache.get(t).is_none() {
            misses.insert(t.trim().to_string());
        }
    }
    if !misses.is_empty() {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let misses: Vec<String> = misses.into_iter().collect();
        let mut failed = Vec::new();
        let mut last_err = String::new();
        for (bi, batch) in misses.chunks(cfg.batch_size.max(1)).enumerate() {
            let mut attempt = 0;
            loop {
                match post_batch(&agent, cfg, batch) {
                    Ok(canon) => {
                        let entries: Vec<(String, String)> = batch
                            .iter()
                            .zip(canon)
                            .map(|(o, c)| {
                                let c = if c.trim().is_empty() { o.to_lowercase() } else { c };
                                (o.clone(), c)
                            })
                            .collect();
                        cache.insert_all(&entries)?;
                        break;
                    }
                    Err(Failure::Protocol(msg)) => return Err(Error::Protocol(msg)),
                    Err(Failure::Transport(msg)) if attempt >= cfg.max_retries => {
                        failed.push(bi);
                        last_err = msg;
                        break;
                    }
                    Err(Failure::Transport(_)) => attempt += 1,
                }
            }
        }
        if !failed.is_empty() {
            return Err(Error::Endpoint {
                batches: failed,
                reason: last_err,
            });
        }
    }
    texts
        .iter()
        .map(|t| {
            cache.get(t).ok_or_else(|| Error::CacheMiss {
                text: t.clone(),
                caption_id: None,
            })
        })
        .collect()
}
