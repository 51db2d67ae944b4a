//! Text embeddings: the provider seam, a remote HTTP provider, and a
//! deterministic feature-hashing fallback that needs no network or weights.
//!
//! Every vector is L2-normalized at construction, so cosine similarity is a
//! plain dot product everywhere downstream.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};

/// Tolerance on the L2 norm of a vector accepted as already normalized.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-4;

/// A finite, unit-length embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Scales `values` to unit length. Fails on empty, non-finite, or all-zero input.
    pub fn normalize(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional vector".into()));
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0, position });
        }
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Ok(Self(values.into_iter().map(|v| (f64::from(v) / norm) as f32).collect()))
    }

    /// Wraps values that are already unit length, keeping them bit-for-bit.
    pub fn from_unit(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("zero-dimensional vector".into()));
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: 0, position });
        }
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("vector norm {norm} is not 1")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Cosine similarity, clamped to [-1, 1]. Both vectors must share a dimension.
    pub fn cosine(&self, other: &EmbeddingVector) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(cosine_unit(&self.0, &other.0))
    }
}

/// Dot product accumulated in f64, left to right.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Cosine of two unit vectors. Negative zero is folded into zero so equal
/// scores compare equal under `total_cmp`.
pub fn cosine_unit(a: &[f32], b: &[f32]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0) + 0.0
}

/// Anything that turns texts into embeddings of a fixed dimension.
pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Stable description of the provider configuration. Stored in indices so
    /// stale ones can be detected.
    fn fingerprint(&self) -> String;

    /// One unit vector per input, in input order.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.embed_batch(&[text.to_string()])?;
        Ok(out.remove(0))
    }

    /// Preferred number of texts per `embed_batch` call.
    fn batch_size(&self) -> usize {
        64
    }
}

/// Offline embedder: lowercased alphanumeric tokens are feature-hashed into
/// `dim` buckets, counted, then normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallbackEmbedder {
    dim: usize,
    seed: u64,
}

pub const DEFAULT_SEED: u64 = 3407;
pub const DEFAULT_FALLBACK_DIM: usize = 256;

impl FallbackEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(Self { dim, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn embed_text(&self, text: &str) -> EmbeddingVector {
        let mut buckets = vec![0f32; self.dim];
        let mut any = false;
        for token in tokens(text) {
            any = true;
            self.add(&mut buckets, token.as_bytes());
        }
        if !any {
            // texts without tokens still need a unit vector
            self.add(&mut buckets, b"\x00<empty>");
        }
        EmbeddingVector::normalize(buckets).expect("hashed counts are finite and nonzero")
    }

    fn add(&self, buckets: &mut [f32], token: &[u8]) {
        let h = mix64(fnv1a(self.seed, token));
        buckets[(h % self.dim as u64) as usize] += 1.0;
    }
}

/// Functional form of [`FallbackEmbedder::embed_text`].
pub fn fallback_embed(text: &str, dim: usize, seed: u64) -> Result<EmbeddingVector> {
    Ok(FallbackEmbedder::new(dim, seed)?.embed_text(text))
}

impl Embedder for FallbackEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("fallback-fnv1a/v1;dim={};seed={}", self.dim, self.seed)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn batch_size(&self) -> usize {
        1024
    }
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(PRIME);
    }
    h
}

// splitmix64 finalizer
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingProviderConfig {
    pub endpoint: String,
    pub model_name: String,
    pub dim: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

fn default_batch_size() -> usize {
    32
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_in_flight() -> usize {
    4
}

impl EmbeddingProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("embedding batch_size must be >= 1".into()));
        }
        if self.max_in_flight == 0 {
            return Err(Error::InvalidArgument("max_in_flight must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    index: usize,
    embedding: Vec<f64>,
}

/// Client for an embedding service speaking
/// `{"model","input":[..]}` → `{"data":[{"index","embedding"}]}`.
pub struct HttpEmbedder {
    config: EmbeddingProviderConfig,
    client: JsonClient,
}

impl HttpEmbedder {
    pub fn new(config: EmbeddingProviderConfig) -> Result<Self> {
        config.validate()?;
        let client = JsonClient::new(
            &config.endpoint,
            Duration::from_secs(config.timeout_secs),
            config.api_key_env.as_deref(),
        )?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &EmbeddingProviderConfig {
        &self.config
    }

    fn request(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let body = EmbedRequest {
            model: &self.config.model_name,
            input: texts,
        };
        let resp: EmbedResponse = self.config.retry.run("embedding request", || self.client.post(&body))?;
        decode_response(resp, texts.len(), self.config.dim)
    }
}

fn decode_response(resp: EmbedResponse, expected: usize, dim: usize) -> Result<Vec<EmbeddingVector>> {
    if resp.data.len() != expected {
        return Err(Error::ProviderResponse(format!(
            "expected {expected} embeddings, got {}",
            resp.data.len()
        )));
    }
    let mut slots: Vec<Option<EmbeddingVector>> = vec![None; expected];
    for datum in resp.data {
        if datum.index >= expected || slots[datum.index].is_some() {
            return Err(Error::ProviderResponse(format!("bad embedding index {}", datum.index)));
        }
        if datum.embedding.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: datum.embedding.len(),
            });
        }
        let values: Vec<f32> = datum.embedding.iter().map(|&v| v as f32).collect();
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: datum.index,
                position,
            });
        }
        let v = EmbeddingVector::normalize(values).map_err(|e| Error::ProviderResponse(e.to_string()))?;
        slots[datum.index] = Some(v);
    }
    Ok(slots.into_iter().map(|v| v.expect("all indices filled")).collect())
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.config.dim
    }

    fn fingerprint(&self) -> String {
        format!(
            "http;endpoint={};model={};dim={}",
            self.config.endpoint, self.config.model_name, self.config.dim
        )
    }

    fn batch_size(&self) -> usize {
        self.config.batch_size
    }

    /// Splits into `batch_size` requests, at most `max_in_flight` concurrently.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let chunks: Vec<&[String]> = texts.chunks(self.config.batch_size).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.config.max_in_flight) {
            let results: Vec<Result<Vec<EmbeddingVector>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave.iter().map(|chunk| s.spawn(|| self.request(chunk))).collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("embedding worker panicked"))
                    .collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }
}
