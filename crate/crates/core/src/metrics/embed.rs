use std::time::Duration;

use serde_json::{json, Value};
use thiserror::Error;

/// Output dimension of both embedders.
pub const EMBED_DIM: usize = 384;

pub const ENV_EMBED_BASE_URL: &str = "EMBED_BASE_URL";
pub const ENV_EMBED_MODEL: &str = "EMBED_MODEL";
pub const DEFAULT_EMBED_MODEL: &str = "all-MiniLM-L6-v2";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("embedder unavailable: {0}")]
pub struct EmbedderUnavailable(pub String);

/// Maps text to a unit-norm vector. Identical text must give identical vectors.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedderUnavailable>;
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Hashed bag of character trigrams. Hermetic and deterministic, no
/// semantics beyond surface overlap.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackEmbedder;

impl FallbackEmbedder {
    pub fn bucket(trigram: &[char]) -> usize {
        // FNV-1a over the UTF-8 bytes
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut buf = [0u8; 4];
        for c in trigram {
            for b in c.encode_utf8(&mut buf).bytes() {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        }
        (hash % EMBED_DIM as u64) as usize
    }

    pub fn trigrams(text: &str) -> Vec<[char; 3]> {
        let padded: Vec<char> = "^^".chars().chain(text.chars()).chain("$$".chars()).collect();
        padded.windows(3).map(|w| [w[0], w[1], w[2]]).collect()
    }
}

impl Embedder for FallbackEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedderUnavailable> {
        let mut v = vec![0.0; EMBED_DIM];
        for t in Self::trigrams(text) {
            v[Self::bucket(&t)] += 1.0;
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

/// Embeddings from an OpenAI-compatible `/embeddings` endpoint.
pub struct ExternalEmbedder {
    base_url: String,
    model: String,
    agent: ureq::Agent,
}

impl ExternalEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base_url: base_url.into(), model: model.into(), agent }
    }

    /// Reads `EMBED_BASE_URL` and optionally `EMBED_MODEL`.
    pub fn from_env() -> Result<Self, EmbedderUnavailable> {
        let base = std::env::var(ENV_EMBED_BASE_URL)
            .map_err(|_| EmbedderUnavailable(format!("{ENV_EMBED_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_EMBED_MODEL).unwrap_or_else(|_| DEFAULT_EMBED_MODEL.to_string());
        Ok(Self::new(base, model))
    }
}

impl Embedder for ExternalEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedderUnavailable> {
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut response = self
            .agent
            .post(&url)
            .send_json(json!({"model": self.model, "input": text}))
            .map_err(|e| EmbedderUnavailable(e.to_string()))?;
        let status = response.status().as_u16();
        if status >= 400 {
            return Err(EmbedderUnavailable(format!("HTTP {status}")));
        }
        let body: Value = response.body_mut().read_json().map_err(|e| EmbedderUnavailable(e.to_string()))?;
        let mut v: Vec<f64> = body
            .pointer("/data/0/embedding")
            .and_then(Value::as_array)
            .ok_or_else(|| EmbedderUnavailable("response has no data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| EmbedderUnavailable("non-numeric embedding".into())))
            .collect::<Result<_, _>>()?;
        if v.is_empty() {
            return Err(EmbedderUnavailable("empty embedding".into()));
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}
