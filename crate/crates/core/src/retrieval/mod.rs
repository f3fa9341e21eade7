//! Zero-shot retrievers scoring free text against an indexed collection
//! (the label space, or a train corpus).
//!
//! Every retriever returns `min(n, collection size)` hits ordered by score
//! descending, ties broken by ascending ordinal. The only exception is a query
//! with no tokens, which yields no hits at all.

mod dense;
mod persist;
mod sparse;
pub mod tokenize;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use dense::{DenseIndex, Embedder, HashingEmbedder, HttpEmbedder};
pub use persist::{load_index, save_index, INDEX_MAGIC, INDEX_VERSION};
pub use sparse::{Bm25Index, Bm25Params, TermStats, TfidfIndex};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_ordinal: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrieverKind {
    Tfidf,
    Bm25,
    Dense,
}

impl RetrieverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RetrieverKind::Tfidf => "tfidf",
            RetrieverKind::Bm25 => "bm25",
            RetrieverKind::Dense => "dense",
        }
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RetrieverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(Self::Tfidf),
            "bm25" => Ok(Self::Bm25),
            "dense" => Ok(Self::Dense),
            other => Err(Error::Config(format!("unknown retriever kind `{other}`"))),
        }
    }
}

#[derive(Debug)]
enum Backing {
    Tfidf(TfidfIndex),
    Bm25(Bm25Index),
    Dense(DenseIndex),
}

/// An immutable index; `top_n` takes `&self` and is safe to call from many
/// threads at once.
#[derive(Debug)]
pub struct RetrieverIndex {
    backing: Backing,
    docs_digest: [u8; 32],
}

/// Digest of the indexed texts, used to check that a persisted index matches
/// the collection it is loaded against.
pub fn docs_digest<S: AsRef<str>>(docs: &[S]) -> [u8; 32] {
    let mut h = Sha256::new();
    for d in docs {
        h.update((d.as_ref().len() as u64).to_le_bytes());
        h.update(d.as_ref().as_bytes());
    }
    h.finalize().into()
}

impl RetrieverIndex {
    /// Builds an index over `docs`; ordinals follow input order.
    /// `embedder` must be supplied exactly when `kind` is dense.
    pub fn build<S: AsRef<str> + Sync>(
        docs: &[S],
        kind: RetrieverKind,
        bm25: Bm25Params,
        embedder: Option<Arc<dyn Embedder>>,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCollection);
        }
        let backing = match (kind, embedder) {
            (RetrieverKind::Dense, Some(e)) => Backing::Dense(DenseIndex::build(docs, e)?),
            (RetrieverKind::Dense, None) => return Err(Error::MissingEmbedder),
            (k, Some(_)) => return Err(Error::UnexpectedEmbedder(k.as_str())),
            (RetrieverKind::Bm25, None) => {
                Backing::Bm25(Bm25Index::new(TermStats::build(docs), bm25))
            }
            (RetrieverKind::Tfidf, None) => Backing::Tfidf(TfidfIndex::new(TermStats::build(docs))),
        };
        Ok(Self {
            backing,
            docs_digest: docs_digest(docs),
        })
    }

    pub fn kind(&self) -> RetrieverKind {
        match self.backing {
            Backing::Tfidf(_) => RetrieverKind::Tfidf,
            Backing::Bm25(_) => RetrieverKind::Bm25,
            Backing::Dense(_) => RetrieverKind::Dense,
        }
    }

    pub fn len(&self) -> usize {
        match &self.backing {
            Backing::Tfidf(i) => i.stats.num_docs(),
            Backing::Bm25(i) => i.stats.num_docs(),
            Backing::Dense(i) => i.num_docs(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn docs_digest(&self) -> [u8; 32] {
        self.docs_digest
    }

    pub fn term_stats(&self) -> Option<&TermStats> {
        match &self.backing {
            Backing::Tfidf(i) => Some(&i.stats),
            Backing::Bm25(i) => Some(&i.stats),
            Backing::Dense(_) => None,
        }
    }

    pub fn as_bm25(&self) -> Option<&Bm25Index> {
        match &self.backing {
            Backing::Bm25(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_tfidf(&self) -> Option<&TfidfIndex> {
        match &self.backing {
            Backing::Tfidf(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_dense(&self) -> Option<&DenseIndex> {
        match &self.backing {
            Backing::Dense(i) => Some(i),
            _ => None,
        }
    }

    /// Top `n` hits for `query`. `n` is clamped to the collection size; a
    /// query without tokens returns no hits.
    pub fn top_n(&self, query: &str, n: usize) -> Result<Vec<ScoredHit>> {
        let n = n.min(self.len());
        if n == 0 {
            return Ok(Vec::new());
        }
        match &self.backing {
            Backing::Tfidf(i) => Ok(i.top_n(query, n)),
            Backing::Bm25(i) => Ok(i.top_n(query, n)),
            Backing::Dense(i) => i.top_n(query, n),
        }
    }

    /// Elementwise identical to calling [`top_n`](Self::top_n) per query.
    pub fn batch_top_n<S: AsRef<str> + Sync>(
        &self,
        queries: &[S],
        n: usize,
    ) -> Result<Vec<Vec<ScoredHit>>> {
        queries
            .par_iter()
            .map(|q| self.top_n(q.as_ref(), n))
            .collect()
    }

    fn from_backing(backing: Backing, docs_digest: [u8; 32]) -> Self {
        Self {
            backing,
            docs_digest,
        }
    }
}

/// Descending score, then ascending ordinal.
pub fn hit_order(a: &ScoredHit, b: &ScoredHit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.doc_ordinal.cmp(&b.doc_ordinal))
}

/// Sorts `hits` into retrieval order and keeps the first `n`.
pub(crate) fn select_top(hits: &mut Vec<ScoredHit>, n: usize) {
    if hits.len() > n && n > 0 {
        hits.select_nth_unstable_by(n - 1, hit_order);
        hits.truncate(n);
    }
    hits.truncate(n);
    hits.sort_unstable_by(hit_order);
}
