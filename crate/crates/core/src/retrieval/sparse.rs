//! Inverted-index lexical retrievers: BM25 (Okapi) and TF-IDF cosine.
//!
//! Both share the same raw statistics (postings with term frequencies and
//! document lengths); the kind-specific weights are derived from them, which
//! is also what lets a persisted index store counts only.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::ScoredHit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

/// Term statistics over an ordered document collection.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStats {
    pub(crate) terms: Vec<String>,
    pub(crate) vocab: HashMap<String, u32>,
    /// Per term id: (doc ordinal, term frequency), ascending ordinal.
    pub(crate) postings: Vec<Vec<(u32, u32)>>,
    pub(crate) doc_len: Vec<u32>,
}

impl TermStats {
    pub fn build<S: AsRef<str>>(docs: &[S]) -> Self {
        let mut terms = Vec::new();
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut postings: Vec<Vec<(u32, u32)>> = Vec::new();
        let mut doc_len = Vec::with_capacity(docs.len());
        for (ordinal, doc) in docs.iter().enumerate() {
            let tokens = tokenize(doc.as_ref());
            doc_len.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                let id = match vocab.get(&term) {
                    Some(&id) => id,
                    None => {
                        let id = terms.len() as u32;
                        vocab.insert(term.clone(), id);
                        terms.push(term);
                        postings.push(Vec::new());
                        id
                    }
                };
                postings[id as usize].push((ordinal as u32, tf));
            }
        }
        Self {
            terms,
            vocab,
            postings,
            doc_len,
        }
    }

    pub(crate) fn from_parts(
        terms: Vec<String>,
        postings: Vec<Vec<(u32, u32)>>,
        doc_len: Vec<u32>,
    ) -> Self {
        let vocab = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            terms,
            vocab,
            postings,
            doc_len,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.doc_len.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    /// Number of documents containing `term` (already normalized).
    pub fn document_frequency(&self, term: &str) -> usize {
        self.vocab
            .get(term)
            .map_or(0, |&id| self.postings[id as usize].len())
    }

    pub fn average_doc_len(&self) -> f64 {
        let total: u64 = self.doc_len.iter().map(|&l| l as u64).sum();
        total as f64 / self.num_docs() as f64
    }
}

/// Okapi BM25 with the non-negative idf `ln(1 + (N - df + 0.5) / (df + 0.5))`.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    pub(crate) stats: TermStats,
    pub(crate) params: Bm25Params,
    idf: Vec<f64>,
    /// `k1 * (1 - b + b * dl / avgdl)` per document.
    length_norm: Vec<f64>,
}

impl Bm25Index {
    pub fn new(stats: TermStats, params: Bm25Params) -> Self {
        let n = stats.num_docs() as f64;
        let idf = stats
            .postings
            .iter()
            .map(|p| bm25_idf(n, p.len() as f64))
            .collect();
        let avgdl = stats.average_doc_len();
        let length_norm = stats
            .doc_len
            .iter()
            .map(|&dl| bm25_length_norm(params, dl as f64, avgdl))
            .collect();
        Self {
            stats,
            params,
            idf,
            length_norm,
        }
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.stats.vocab.get(term).map(|&id| self.idf[id as usize])
    }

    pub(crate) fn top_n(&self, query: &str, n: usize) -> Vec<ScoredHit> {
        let tokens = tokenize(query);
        if tokens.is_empty() {
            return Vec::new();
        }
        let k1 = self.params.k1;
        let mut acc = Accumulator::new(self.stats.num_docs());
        // Every query token occurrence contributes, in query order.
        for token in &tokens {
            let Some(&id) = self.stats.vocab.get(token) else {
                continue;
            };
            let idf = self.idf[id as usize];
            for &(doc, tf) in &self.stats.postings[id as usize] {
                let tf = tf as f64;
                let contribution = idf * (tf * (k1 + 1.0)) / (tf + self.length_norm[doc as usize]);
                acc.add(doc, contribution);
            }
        }
        acc.into_top_n(n, 1.0)
    }
}

pub(crate) fn bm25_idf(n: f64, df: f64) -> f64 {
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub(crate) fn bm25_length_norm(params: Bm25Params, dl: f64, avgdl: f64) -> f64 {
    if avgdl > 0.0 {
        params.k1 * (1.0 - params.b + params.b * dl / avgdl)
    } else {
        params.k1 * (1.0 - params.b)
    }
}

/// TF-IDF cosine: raw tf, smooth idf `ln((N + 1) / (df + 1)) + 1`,
/// L2-normalized document vectors.
#[derive(Debug, Clone)]
pub struct TfidfIndex {
    pub(crate) stats: TermStats,
    idf: Vec<f64>,
    /// Normalized weight per posting, parallel to `stats.postings`.
    weights: Vec<Vec<f64>>,
}

impl TfidfIndex {
    pub fn new(stats: TermStats) -> Self {
        let n = stats.num_docs() as f64;
        let idf: Vec<f64> = stats
            .postings
            .iter()
            .map(|p| tfidf_idf(n, p.len() as f64))
            .collect();
        // Squared norms summed in lexicographic term order, so documents that
        // are permutations of each other get bit-identical norms.
        let mut order: Vec<usize> = (0..stats.terms.len()).collect();
        order.sort_by(|&a, &b| stats.terms[a].cmp(&stats.terms[b]));
        let mut sq = vec![0.0f64; stats.num_docs()];
        for &id in &order {
            for &(doc, tf) in &stats.postings[id] {
                let w = tf as f64 * idf[id];
                sq[doc as usize] += w * w;
            }
        }
        let norms: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
        let weights = stats
            .postings
            .iter()
            .enumerate()
            .map(|(id, p)| {
                p.iter()
                    .map(|&(doc, tf)| tf as f64 * idf[id] / norms[doc as usize])
                    .collect()
            })
            .collect();
        Self {
            stats,
            idf,
            weights,
        }
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.stats.vocab.get(term).map(|&id| self.idf[id as usize])
    }

    pub(crate) fn top_n(&self, query: &str, n: usize) -> Vec<ScoredHit> {
        let tokens = tokenize(query);
        if tokens.is_empty() {
            return Vec::new();
        }
        // Query term counts in first-occurrence order; out-of-vocabulary
        // terms cannot match and are left out of the query vector.
        let mut qterms: Vec<(u32, u32)> = Vec::new();
        for token in &tokens {
            if let Some(&id) = self.stats.vocab.get(token) {
                match qterms.iter_mut().find(|(t, _)| *t == id) {
                    Some((_, c)) => *c += 1,
                    None => qterms.push((id, 1)),
                }
            }
        }
        let qweights: Vec<f64> = qterms
            .iter()
            .map(|&(id, c)| c as f64 * self.idf[id as usize])
            .collect();
        let qnorm = qweights.iter().map(|w| w * w).sum::<f64>().sqrt();
        // qnorm > 0 whenever any posting is touched.
        let mut acc = Accumulator::new(self.stats.num_docs());
        for (&(id, _), &qw) in qterms.iter().zip(&qweights) {
            let postings = &self.stats.postings[id as usize];
            for (&(doc, _), &dw) in postings.iter().zip(&self.weights[id as usize]) {
                acc.add(doc, qw * dw);
            }
        }
        acc.into_top_n(n, qnorm)
    }
}

pub(crate) fn tfidf_idf(n: f64, df: f64) -> f64 {
    ((n + 1.0) / (df + 1.0)).ln() + 1.0
}

/// Dense score accumulator that remembers which documents were touched.
struct Accumulator {
    scores: Vec<f64>,
    touched: Vec<u32>,
}

impl Accumulator {
    fn new(num_docs: usize) -> Self {
        Self {
            scores: vec![0.0; num_docs],
            touched: Vec::new(),
        }
    }

    fn add(&mut self, doc: u32, value: f64) {
        let slot = &mut self.scores[doc as usize];
        if *slot == 0.0 {
            self.touched.push(doc);
        }
        *slot += value;
    }

    /// Touched documents carry strictly positive scores; untouched ones score
    /// zero and fill the tail in ascending ordinal order.
    fn into_top_n(self, n: usize, divisor: f64) -> Vec<ScoredHit> {
        let Accumulator {
            scores,
            mut touched,
        } = self;
        touched.sort_unstable();
        touched.dedup();
        let mut hits: Vec<ScoredHit> = touched
            .iter()
            .map(|&doc| ScoredHit {
                doc_ordinal: doc as usize,
                score: scores[doc as usize] / divisor,
            })
            .collect();
        super::select_top(&mut hits, n);
        if hits.len() < n {
            let mut is_touched = vec![false; scores.len()];
            for &doc in &touched {
                is_touched[doc as usize] = true;
            }
            hits.extend(
                (0..scores.len())
                    .filter(|&d| !is_touched[d])
                    .take(n - hits.len())
                    .map(|d| ScoredHit {
                        doc_ordinal: d,
                        score: 0.0,
                    }),
            );
        }
        hits
    }
}
