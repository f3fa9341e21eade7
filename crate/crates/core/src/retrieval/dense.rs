//! Dense retrieval: brute-force cosine over unit-norm embeddings.

use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use super::tokenize::tokenize;
use super::ScoredHit;
use crate::error::{Error, Result};

/// Text encoder behind the dense retriever. Implementations must be
/// deterministic per text and return unit-norm vectors of `dimension()`.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;

    /// Stable descriptor persisted alongside dense indices.
    fn id(&self) -> String;

    fn embed(&self, text: &str) -> Result<Vec<f32>>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub(crate) fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn normalize(v: &mut [f32]) {
    let norm = v
        .iter()
        .map(|x| (*x as f64) * (*x as f64))
        .sum::<f64>()
        .sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x = (*x as f64 / norm) as f32;
        }
    }
}

/// Feature-hashing embedder: each token adds 1 to a seeded bucket, then the
/// vector is L2-normalized. Token-free text hashes the empty string, so the
/// output is never the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl HashingEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim, seed }
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hashing:{}:{}", self.dim, self.seed)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        let mut v = vec![0.0f32; self.dim];
        let tokens = tokenize(text);
        if tokens.is_empty() {
            v[(fnv1a(self.seed, b"") % self.dim as u64) as usize] = 1.0;
        }
        for t in &tokens {
            v[(fnv1a(self.seed, t.as_bytes()) % self.dim as u64) as usize] += 1.0;
        }
        normalize(&mut v);
        Ok(v)
    }
}

/// Client for an OpenAI-compatible `/embeddings` endpoint, for plugging in a
/// served encoder. Vectors are re-normalized on receipt.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    model: String,
    api_key: Option<String>,
    dim: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    index: usize,
    embedding: Vec<f32>,
}

impl HttpEmbedder {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<String>,
        dim: usize,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| Error::Embedding(e.to_string()))?;
        Ok(Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            dim,
        })
    }
}

impl Embedder for HttpEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("http:{}:{}", self.model, self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        Ok(self.embed_batch(&[text])?.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>> {
        let mut req = self
            .client
            .post(format!("{}/embeddings", self.base_url))
            .json(&json!({ "model": self.model, "input": texts }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Error::Embedding(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(Error::Embedding(format!("HTTP {status}")));
        }
        let mut body: EmbeddingResponse =
            resp.json().map_err(|e| Error::Embedding(e.to_string()))?;
        body.data.sort_by_key(|d| d.index);
        if body.data.len() != texts.len() {
            return Err(Error::Embedding(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        body.data
            .into_iter()
            .map(|d| {
                if d.embedding.len() != self.dim {
                    return Err(Error::Embedding(format!(
                        "expected dimension {}, got {}",
                        self.dim,
                        d.embedding.len()
                    )));
                }
                let mut v = d.embedding;
                normalize(&mut v);
                Ok(v)
            })
            .collect()
    }
}

/// Row-major embedding matrix over the indexed collection.
pub struct DenseIndex {
    pub(crate) embedder: Arc<dyn Embedder>,
    pub(crate) dim: usize,
    pub(crate) matrix: Vec<f32>,
}

impl std::fmt::Debug for DenseIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseIndex")
            .field("embedder", &self.embedder.id())
            .field("dim", &self.dim)
            .field("rows", &self.num_docs())
            .finish()
    }
}

const EMBED_CHUNK: usize = 256;

impl DenseIndex {
    pub fn build<S: AsRef<str> + Sync>(docs: &[S], embedder: Arc<dyn Embedder>) -> Result<Self> {
        let dim = embedder.dimension();
        let chunks: Vec<Vec<Vec<f32>>> = docs
            .par_chunks(EMBED_CHUNK)
            .map(|chunk| {
                let texts: Vec<&str> = chunk.iter().map(|d| d.as_ref()).collect();
                embedder.embed_batch(&texts)
            })
            .collect::<Result<_>>()?;
        let mut matrix = Vec::with_capacity(docs.len() * dim);
        for row in chunks.into_iter().flatten() {
            if row.len() != dim {
                return Err(Error::Embedding(format!(
                    "embedder returned dimension {} instead of {dim}",
                    row.len()
                )));
            }
            matrix.extend_from_slice(&row);
        }
        Ok(Self {
            embedder,
            dim,
            matrix,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.matrix.len() / self.dim
    }

    pub fn row(&self, ordinal: usize) -> &[f32] {
        &self.matrix[ordinal * self.dim..(ordinal + 1) * self.dim]
    }

    pub(crate) fn top_n(&self, query: &str, n: usize) -> Result<Vec<ScoredHit>> {
        if tokenize(query).is_empty() {
            return Ok(Vec::new());
        }
        let q = self.embedder.embed(query)?;
        let mut hits: Vec<ScoredHit> = self
            .matrix
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(doc_ordinal, row)| ScoredHit {
                doc_ordinal,
                score: dot(&q, row) as f64,
            })
            .collect();
        super::select_top(&mut hits, n);
        Ok(hits)
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
