//! Final top-K selection from a shortlist.
//!
//! Every strategy only ever emits labels taken from the shortlist, without
//! duplicates, whatever the model or scorer returns.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, LabelSpace};
use crate::error::{Error, Result};
use crate::llm::{parse_index_list, Bindings, PromptSession, TemplateKind};
use crate::retrieval::tokenize::tokenize;
use crate::shortlist::{NeighborMatrix, Shortlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RerankStrategy {
    Heuristic,
    Scorer,
    Llm,
}

impl RerankStrategy {
    pub const ALL: [RerankStrategy; 3] = [Self::Heuristic, Self::Scorer, Self::Llm];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Heuristic => "heuristic",
            Self::Scorer => "scorer",
            Self::Llm => "llm",
        }
    }
}

impl fmt::Display for RerankStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RerankStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown rerank strategy `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedPrediction {
    pub uid: String,
    pub lids: Vec<String>,
    pub strategy: RerankStrategy,
    /// Labels appended from heuristic order after the model's own picks.
    pub padded: usize,
    /// The model call failed and the whole list is heuristic order.
    pub fallback: bool,
}

impl RankedPrediction {
    fn new(uid: &str, lids: Vec<String>, strategy: RerankStrategy) -> Self {
        Self {
            uid: uid.to_string(),
            lids,
            strategy,
            padded: 0,
            fallback: false,
        }
    }
}

/// Breadth-first round-robin over the neighbor rows: every row contributes
/// its best not-yet-emitted label at depth 1, then again at depth 2, and so
/// on until `top_k` labels are out or all rows are exhausted.
pub fn rerank_heuristic(uid: &str, neighbors: &NeighborMatrix, top_k: usize) -> RankedPrediction {
    RankedPrediction::new(
        uid,
        heuristic_order(neighbors, top_k),
        RerankStrategy::Heuristic,
    )
}

fn heuristic_order(neighbors: &NeighborMatrix, top_k: usize) -> Vec<String> {
    let rows = &neighbors.rows;
    let mut cursor = vec![0usize; rows.len()];
    let mut emitted: HashSet<&str> = HashSet::new();
    let mut out = Vec::new();
    loop {
        let mut progressed = false;
        for (j, row) in rows.iter().enumerate() {
            if out.len() == top_k {
                return out;
            }
            while let Some(n) = row.get(cursor[j]) {
                cursor[j] += 1;
                if emitted.insert(n.lid.as_str()) {
                    out.push(n.lid.clone());
                    progressed = true;
                    break;
                }
            }
        }
        if !progressed || out.len() == top_k {
            return out;
        }
    }
}

/// Relevance of a candidate label text to a query text.
pub trait RelevanceScorer: Send + Sync {
    fn score(&self, query: &str, candidate: &str) -> std::result::Result<f64, String>;
}

/// Share of the candidate's distinct tokens that also occur in the query.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlapScorer;

impl RelevanceScorer for TokenOverlapScorer {
    fn score(&self, query: &str, candidate: &str) -> std::result::Result<f64, String> {
        let q: HashSet<String> = tokenize(query).into_iter().collect();
        let c: HashSet<String> = tokenize(candidate).into_iter().collect();
        if c.is_empty() {
            return Ok(0.0);
        }
        Ok(c.intersection(&q).count() as f64 / c.len() as f64)
    }
}

/// Scores every candidate against `query` and keeps the best `top_k`. Ties
/// keep shortlist order; candidates the scorer fails on go last.
pub fn rerank_scorer(
    query: &str,
    shortlist: &Shortlist,
    top_k: usize,
    scorer: &dyn RelevanceScorer,
    space: &LabelSpace,
) -> RankedPrediction {
    let mut scored: Vec<(&str, Option<f64>)> = shortlist
        .lids()
        .map(|lid| {
            let text = space.text_of(lid).unwrap_or_default();
            match scorer.score(query, text) {
                Ok(s) if !s.is_nan() => (lid, Some(s)),
                Ok(_) => {
                    log::warn!("{}: scorer returned NaN for `{lid}`", shortlist.uid);
                    (lid, None)
                }
                Err(e) => {
                    log::warn!("{}: scorer failed on `{lid}`: {e}", shortlist.uid);
                    (lid, None)
                }
            }
        })
        .collect();
    scored.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let lids = scored
        .into_iter()
        .take(top_k)
        .map(|(lid, _)| lid.to_string())
        .collect();
    RankedPrediction::new(&shortlist.uid, lids, RerankStrategy::Scorer)
}

/// Heuristic order over the whole shortlist: round-robin over the rows,
/// then any shortlist entry the rows did not reach.
fn full_fallback_order(shortlist: &Shortlist, neighbors: &NeighborMatrix) -> Vec<String> {
    let mut order = heuristic_order(neighbors, usize::MAX);
    order.retain(|lid| shortlist.contains(lid));
    let have: HashSet<String> = order.iter().cloned().collect();
    order.extend(
        shortlist
            .lids()
            .filter(|l| !have.contains(*l))
            .map(str::to_owned),
    );
    order
}

/// Listwise selection by the model. Indices it returns are mapped back to
/// shortlist labels; a short answer is padded from heuristic order, and a
/// failed call falls back to heuristic order entirely.
pub fn rerank_llm(
    x: &Instance,
    shortlist: &Shortlist,
    neighbors: &NeighborMatrix,
    top_k: usize,
    session: &PromptSession<'_>,
    space: &LabelSpace,
) -> Result<RankedPrediction> {
    let mut prediction = RankedPrediction::new(&x.uid, Vec::new(), RerankStrategy::Llm);
    if shortlist.is_empty() || top_k == 0 {
        return Ok(prediction);
    }
    let want = top_k.min(shortlist.len());
    let candidates: Vec<String> = shortlist
        .lids()
        .map(|lid| space.text_of(lid).unwrap_or_default().to_string())
        .collect();
    let bindings = Bindings {
        title: Some(&x.title),
        content: Some(session.content_of(x)),
        count: Some(top_k),
        candidates: Some(&candidates),
        ..Default::default()
    };
    let picked = match session.complete(TemplateKind::Rerank, &bindings) {
        Ok((_, response)) => parse_index_list(&response.text, shortlist.len(), want),
        Err(Error::Llm(e)) => {
            log::warn!("{}: rerank call failed, using heuristic order: {e}", x.uid);
            prediction.fallback = true;
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    prediction.lids = picked
        .into_iter()
        .map(|i| shortlist.entries[i - 1].lid.clone())
        .collect();
    if prediction.lids.len() < want {
        let taken: HashSet<String> = prediction.lids.iter().cloned().collect();
        let before = prediction.lids.len();
        prediction.lids.extend(
            full_fallback_order(shortlist, neighbors)
                .into_iter()
                .filter(|l| !taken.contains(l))
                .take(want - before),
        );
        if !prediction.fallback {
            prediction.padded = prediction.lids.len() - before;
        }
    }
    Ok(prediction)
}

/// Line of the prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub uid: String,
    pub lids: Vec<String>,
    pub strategy: RerankStrategy,
    pub padded: usize,
    /// Present and true only when the model call failed and heuristic order
    /// was used instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

impl From<&RankedPrediction> for PredictionRecord {
    fn from(p: &RankedPrediction) -> Self {
        Self {
            uid: p.uid.clone(),
            lids: p.lids.clone(),
            strategy: p.strategy,
            padded: p.padded,
            fallback: p.fallback,
        }
    }
}
