//! Candidate shortlists: the model's raw label guesses are each mapped to
//! their `s` nearest labels, and the rows are unioned in row-major order
//! (guess index outer, neighbor rank inner) keeping first occurrences.
//!
//! Two alternative sources feed the same structures: a plain retriever
//! shortlist over the instance text, and hint-mode generation where the
//! retriever's labels are shown to the model as hints.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, LabelSpace};
use crate::demogen::DemonstrationSet;
use crate::error::{Error, Result};
use crate::llm::{parse_label_list, Bindings, PromptSession, TemplateKind};
use crate::retrieval::RetrieverIndex;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawGeneration {
    pub texts: Vec<String>,
    /// Cache key of the request that produced `texts`.
    pub prompt_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub lid: String,
    pub score: f64,
}

/// Per raw label, its nearest labels in retrieval order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeighborMatrix {
    pub rows: Vec<Vec<Neighbor>>,
}

impl NeighborMatrix {
    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub lid: String,
    /// Row of the neighbor matrix this label was first found in (0-based).
    pub j: usize,
    /// Rank within that row (0-based).
    pub r: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Shortlist {
    pub uid: String,
    pub entries: Vec<ShortlistEntry>,
}

impl Shortlist {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.lid.as_str())
    }

    pub fn contains(&self, lid: &str) -> bool {
        self.entries.iter().any(|e| e.lid == lid)
    }
}

/// Row-major union of `neighbors`, first occurrence wins.
pub fn union_rows(uid: &str, neighbors: &NeighborMatrix) -> Shortlist {
    let mut seen: HashSet<&str> = HashSet::new();
    let mut entries = Vec::new();
    for (j, row) in neighbors.rows.iter().enumerate() {
        for (r, n) in row.iter().enumerate() {
            if seen.insert(n.lid.as_str()) {
                entries.push(ShortlistEntry {
                    lid: n.lid.clone(),
                    j,
                    r,
                    score: n.score,
                });
            }
        }
    }
    Shortlist {
        uid: uid.to_string(),
        entries,
    }
}

fn neighbor_row(
    query: &str,
    s: usize,
    index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<Vec<Neighbor>> {
    Ok(index
        .top_n(query, s)?
        .into_iter()
        .map(|h| Neighbor {
            lid: space.labels()[h.doc_ordinal].lid.clone(),
            score: h.score,
        })
        .collect())
}

fn generate(
    session: &PromptSession<'_>,
    kind: TemplateKind,
    bindings: &Bindings<'_>,
    k: usize,
) -> Result<RawGeneration> {
    let (prompt_digest, response) = session.complete(kind, bindings)?;
    Ok(RawGeneration {
        texts: parse_label_list(&response.text, k),
        prompt_digest,
    })
}

/// Asks the model for up to `k` label texts, conditioned on `demos` (the
/// demonstration block is omitted when the set is empty).
pub fn infer_raw_labels(
    x: &Instance,
    demos: &DemonstrationSet,
    k: usize,
    session: &PromptSession<'_>,
    space: &LabelSpace,
) -> Result<RawGeneration> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let texts = demos.prompt_texts(space);
    let bindings = Bindings {
        title: Some(&x.title),
        content: Some(session.content_of(x)),
        count: Some(k),
        demonstrations: Some(&texts),
        ..Default::default()
    };
    generate(session, TemplateKind::Inference, &bindings, k)
}

/// Free generation with the texts of `hints` listed in the prompt.
pub fn hint_generation(
    x: &Instance,
    hints: &Shortlist,
    k: usize,
    session: &PromptSession<'_>,
    space: &LabelSpace,
) -> Result<RawGeneration> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if hints.is_empty() {
        return Err(Error::Invalid(
            "hint generation needs at least one hint".into(),
        ));
    }
    let texts: Vec<String> = hints
        .lids()
        .filter_map(|lid| space.text_of(lid).map(str::to_owned))
        .collect();
    let bindings = Bindings {
        title: Some(&x.title),
        content: Some(session.content_of(x)),
        count: Some(k),
        hints: Some(&texts),
        ..Default::default()
    };
    generate(session, TemplateKind::HintInference, &bindings, k)
}

/// Maps each raw label to its top-`s` labels and unions the rows.
pub fn map_to_label_space(
    uid: &str,
    raw: &RawGeneration,
    s: usize,
    index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<(Shortlist, NeighborMatrix)> {
    if s == 0 {
        return Err(Error::Invalid("s must be at least 1".into()));
    }
    let rows = raw
        .texts
        .iter()
        .map(|t| neighbor_row(t, s, index, space))
        .collect::<Result<Vec<_>>>()?;
    let matrix = NeighborMatrix { rows };
    Ok((union_rows(uid, &matrix), matrix))
}

/// Top-`budget` labels for `query`, as a single-row neighbor matrix.
pub fn retriever_shortlist(
    uid: &str,
    query: &str,
    budget: usize,
    index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<(Shortlist, NeighborMatrix)> {
    if budget == 0 {
        return Err(Error::Invalid("budget must be at least 1".into()));
    }
    let matrix = NeighborMatrix {
        rows: vec![neighbor_row(query, budget, index, space)?],
    };
    Ok((union_rows(uid, &matrix), matrix))
}

/// Line of the shortlist dump. Carries the raw generations and neighbor rows
/// as well, so reranking can be replayed from the dump alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortlistRecord {
    pub uid: String,
    pub candidates: Vec<ShortlistEntry>,
    pub rows: NeighborMatrix,
    pub raw: Vec<String>,
    /// Set when the shortlist came from the retriever because generation
    /// produced nothing usable.
    pub fallback: bool,
}

impl ShortlistRecord {
    pub fn new(
        shortlist: &Shortlist,
        rows: &NeighborMatrix,
        raw: &[String],
        fallback: bool,
    ) -> Self {
        Self {
            uid: shortlist.uid.clone(),
            candidates: shortlist.entries.clone(),
            rows: rows.clone(),
            raw: raw.to_vec(),
            fallback,
        }
    }

    /// Splits the record back into its parts, checking every label against
    /// `space` and the candidates against the row union.
    pub fn into_parts(self, space: &LabelSpace) -> Result<(Shortlist, NeighborMatrix)> {
        for n in self.rows.rows.iter().flatten() {
            if !space.contains(&n.lid) {
                return Err(Error::UnknownLabel {
                    uid: self.uid.clone(),
                    lid: n.lid.clone(),
                });
            }
        }
        let shortlist = Shortlist {
            uid: self.uid,
            entries: self.candidates,
        };
        if union_rows(&shortlist.uid, &self.rows) != shortlist {
            return Err(Error::Invalid(format!(
                "{}: shortlist candidates disagree with neighbor rows",
                shortlist.uid
            )));
        }
        Ok((shortlist, self.rows))
    }
}
