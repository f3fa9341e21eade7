//! Pseudo demonstrations for in-context inference.
//!
//! Three ways to build the set for a test instance:
//!
//! * content-based: the model writes `m` pseudo inputs from the instance,
//!   and each is paired with its top-`n` retrieved labels;
//! * label-centric: the instance's top-`n` labels are retrieved first, the
//!   model writes one pseudo input per label, and identical inputs merge
//!   their labels;
//! * retrieval: the top-`m` neighbors from an unpaired train corpus stand in
//!   for generated inputs, then get paired exactly like content-based ones.
//!
//! `corrupt` implements the two ablations (random inputs, random labels).

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, LabelSpace};
use crate::error::{Error, Result};
use crate::llm::{parse_label_list, Bindings, DemoText, PromptSession, TemplateKind};
use crate::retrieval::RetrieverIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoStrategy {
    Content,
    LabelCentric,
    Retrieval,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demonstration {
    pub input_text: String,
    pub label_ids: Vec<String>,
}

impl Demonstration {
    /// Checks the invariants: non-empty input, non-empty duplicate-free label
    /// list, every label present in `space`.
    pub fn new(input_text: String, label_ids: Vec<String>, space: &LabelSpace) -> Result<Self> {
        if input_text.trim().is_empty() {
            return Err(Error::Demonstration("empty input text".into()));
        }
        if label_ids.is_empty() {
            return Err(Error::Demonstration(format!(
                "`{input_text}` has no labels"
            )));
        }
        for (i, lid) in label_ids.iter().enumerate() {
            if !space.contains(lid) {
                return Err(Error::Demonstration(format!("unknown label `{lid}`")));
            }
            if label_ids[..i].contains(lid) {
                return Err(Error::Demonstration(format!("duplicate label `{lid}`")));
            }
        }
        Ok(Self {
            input_text,
            label_ids,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemonstrationSet {
    pub items: Vec<Demonstration>,
    pub strategy: DemoStrategy,
    /// Set when a generating strategy produced nothing usable.
    pub degraded: bool,
}

impl DemonstrationSet {
    pub fn empty(strategy: DemoStrategy) -> Self {
        Self {
            items: Vec::new(),
            strategy,
            degraded: strategy != DemoStrategy::None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Demonstrations as prompt text, label ids resolved to label texts.
    pub fn prompt_texts(&self, space: &LabelSpace) -> Vec<DemoText> {
        self.items
            .iter()
            .map(|d| DemoText {
                input: d.input_text.clone(),
                labels: d
                    .label_ids
                    .iter()
                    .filter_map(|lid| space.text_of(lid).map(str::to_owned))
                    .collect(),
            })
            .collect()
    }
}

/// Top-`n` label ids for `query`, in retrieval order.
fn top_label_ids(
    query: &str,
    n: usize,
    index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<Vec<String>> {
    Ok(index
        .top_n(query, n)?
        .into_iter()
        .map(|h| space.labels()[h.doc_ordinal].lid.clone())
        .collect())
}

/// Pairs each pseudo input with its top-`n` labels, dropping inputs whose
/// retrieval comes back empty.
fn pair_with_labels(
    inputs: Vec<String>,
    n: usize,
    label_index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<Vec<Demonstration>> {
    let mut items = Vec::with_capacity(inputs.len());
    for z in inputs {
        let lids = top_label_ids(&z, n, label_index, space)?;
        if lids.is_empty() {
            continue;
        }
        items.push(Demonstration::new(z, lids, space)?);
    }
    Ok(items)
}

pub fn generate_content_based(
    x: &Instance,
    m: usize,
    n: usize,
    session: &PromptSession<'_>,
    label_index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<DemonstrationSet> {
    let content = session.content_of(x);
    let bindings = Bindings {
        title: Some(&x.title),
        content: Some(content),
        count: Some(m),
        ..Default::default()
    };
    let (_, response) = session.complete(TemplateKind::ContentDemos, &bindings)?;
    let inputs = parse_label_list(&response.text, m);
    let items = pair_with_labels(inputs, n, label_index, space)?;
    if items.is_empty() {
        log::warn!("{}: no usable content-based demonstrations", x.uid);
        return Ok(DemonstrationSet::empty(DemoStrategy::Content));
    }
    Ok(DemonstrationSet {
        items,
        strategy: DemoStrategy::Content,
        degraded: false,
    })
}

fn fold_key(text: &str) -> String {
    text.trim().to_lowercase()
}

/// Merges demonstrations whose inputs match after trim and case-fold. The
/// first occurrence keeps its position and text; later label lists are
/// appended in order, skipping labels already present.
pub fn merge_duplicate_inputs(items: Vec<Demonstration>) -> Vec<Demonstration> {
    let mut out: Vec<Demonstration> = Vec::with_capacity(items.len());
    let mut slot: HashMap<String, usize> = HashMap::new();
    for d in items {
        match slot.get(&fold_key(&d.input_text)) {
            Some(&i) => {
                for lid in d.label_ids {
                    if !out[i].label_ids.contains(&lid) {
                        out[i].label_ids.push(lid);
                    }
                }
            }
            None => {
                slot.insert(fold_key(&d.input_text), out.len());
                out.push(Demonstration {
                    input_text: d.input_text.trim().to_string(),
                    label_ids: d.label_ids,
                });
            }
        }
    }
    out
}

/// `query` is the instance text the retriever matches labels against.
pub fn generate_label_centric(
    x: &Instance,
    query: &str,
    n: usize,
    session: &PromptSession<'_>,
    label_index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<DemonstrationSet> {
    let lids = top_label_ids(query, n, label_index, space)?;
    if lids.is_empty() {
        log::warn!(
            "{}: no labels retrieved for label-centric generation",
            x.uid
        );
        return Ok(DemonstrationSet::empty(DemoStrategy::LabelCentric));
    }
    let texts: Vec<String> = lids
        .iter()
        .map(|lid| space.text_of(lid).unwrap_or_default().to_string())
        .collect();
    let bindings = Bindings {
        title: Some(&x.title),
        content: Some(session.content_of(x)),
        labels: Some(&texts),
        ..Default::default()
    };
    let (_, response) = session.complete(TemplateKind::LabelDemos, &bindings)?;
    let inputs = parse_label_list(&response.text, lids.len());
    if inputs.len() < lids.len() {
        log::warn!(
            "{}: {} pseudo inputs for {} labels; trailing labels dropped",
            x.uid,
            inputs.len(),
            lids.len()
        );
    }
    let singles = inputs
        .into_iter()
        .zip(lids)
        .map(|(z, lid)| Demonstration::new(z, vec![lid], space))
        .collect::<Result<Vec<_>>>()?;
    let items = merge_duplicate_inputs(singles);
    if items.is_empty() {
        log::warn!("{}: empty label-centric generation", x.uid);
        return Ok(DemonstrationSet::empty(DemoStrategy::LabelCentric));
    }
    Ok(DemonstrationSet {
        items,
        strategy: DemoStrategy::LabelCentric,
        degraded: false,
    })
}

/// Uses the top-`m` train instances for `query` as demonstration inputs
/// (their titles), each paired with its top-`n` labels. Never calls the model.
pub fn retrieve_demonstrations(
    query: &str,
    m: usize,
    n: usize,
    train_index: &RetrieverIndex,
    train_corpus: &[Instance],
    label_index: &RetrieverIndex,
    space: &LabelSpace,
) -> Result<DemonstrationSet> {
    if train_corpus.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let inputs: Vec<String> = train_index
        .top_n(query, m)?
        .into_iter()
        .map(|h| train_corpus[h.doc_ordinal].title.clone())
        .collect();
    let items = pair_with_labels(inputs, n, label_index, space)?;
    Ok(DemonstrationSet {
        degraded: items.is_empty(),
        items,
        strategy: DemoStrategy::Retrieval,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    RandomInputs,
    RandomLabels,
}

const WORDLIST: &[&str] = &[
    "able", "acid", "aged", "also", "area", "army", "away", "baby", "back", "ball", "band", "bank",
    "base", "bath", "bear", "beat", "been", "bell", "belt", "best", "bill", "bird", "blow", "blue",
    "boat", "body", "bone", "book", "born", "both", "bowl", "bulk", "burn", "bush", "busy", "cake",
    "call", "calm", "came", "camp", "card", "care", "case", "cash", "cast", "cell", "chip", "city",
    "club", "coal", "coat", "code", "cold", "come", "cook", "cool", "cope", "copy", "core", "cost",
    "crew", "crop", "dark", "data", "date", "dawn", "days", "dead", "deal", "dean", "dear", "debt",
    "deep", "deny", "desk", "dial", "diet", "disc", "disk", "door", "dose", "down", "draw", "drew",
    "drop", "drug", "dual", "duke", "dust", "duty", "each", "earn", "ease", "east", "easy", "edge",
    "else", "even", "ever", "face", "fact", "fail", "fair", "fall", "farm", "fast", "fate", "fear",
    "feed", "feel", "file", "fill", "film", "find", "fine", "fire", "firm", "fish", "five", "flat",
    "flow", "food", "foot", "form", "fort", "four", "free", "from", "fuel", "full", "fund", "gain",
    "game", "gate", "gave", "gear", "gift", "girl", "give", "glad", "goal", "gold", "golf", "good",
    "gray", "grew", "grey", "grow", "gulf", "hair", "half", "hall", "hand", "hang", "hard", "harm",
    "hate", "have", "head", "hear", "heat", "held", "hell", "help", "here", "hero", "high", "hill",
    "hire", "hold", "hole", "holy", "home", "hope", "host", "hour", "huge", "hung", "hunt", "hurt",
    "idea", "inch", "into", "iron", "item", "jack", "jane", "jean", "join", "jump", "jury", "just",
    "keen", "keep", "kent", "kept", "kick", "kill", "kind", "king", "knee", "knew", "know", "lack",
    "lady", "laid", "lake", "land", "lane",
];

/// Ablation corruption. `RandomInputs` replaces each input with as many
/// words as it had, drawn from a fixed wordlist; `RandomLabels` replaces each
/// label list with a same-size uniform sample (without replacement) from
/// `space`. Sizes and order are preserved; equal seeds give equal output.
pub fn corrupt(
    set: &DemonstrationSet,
    mode: Corruption,
    seed: u64,
    space: &LabelSpace,
) -> DemonstrationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = set
        .items
        .iter()
        .map(|d| match mode {
            Corruption::RandomInputs => {
                let words = d.input_text.split_whitespace().count().max(1);
                let text: Vec<&str> = (0..words)
                    .map(|_| WORDLIST[rng.random_range(0..WORDLIST.len())])
                    .collect();
                Demonstration {
                    input_text: text.join(" "),
                    label_ids: d.label_ids.clone(),
                }
            }
            Corruption::RandomLabels => {
                let size = d.label_ids.len().min(space.len());
                let label_ids = sample(&mut rng, space.len(), size)
                    .into_iter()
                    .map(|o| space.labels()[o].lid.clone())
                    .collect();
                Demonstration {
                    input_text: d.input_text.clone(),
                    label_ids,
                }
            }
        })
        .collect();
    DemonstrationSet {
        items,
        strategy: set.strategy,
        degraded: set.degraded,
    }
}

/// Line of the demonstration dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub uid: String,
    pub strategy: DemoStrategy,
    pub items: Vec<DemoItemRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoItemRecord {
    pub z: String,
    pub lids: Vec<String>,
}

impl DemoRecord {
    pub fn from_set(uid: &str, set: &DemonstrationSet) -> Self {
        Self {
            uid: uid.to_string(),
            strategy: set.strategy,
            items: set
                .items
                .iter()
                .map(|d| DemoItemRecord {
                    z: d.input_text.clone(),
                    lids: d.label_ids.clone(),
                })
                .collect(),
        }
    }

    /// Rebuilds the set, re-validating every demonstration against `space`.
    pub fn to_set(&self, space: &LabelSpace) -> Result<DemonstrationSet> {
        let items = self
            .items
            .iter()
            .map(|i| Demonstration::new(i.z.clone(), i.lids.clone(), space))
            .collect::<Result<Vec<_>>>()?;
        Ok(DemonstrationSet {
            degraded: items.is_empty() && self.strategy != DemoStrategy::None,
            items,
            strategy: self.strategy,
        })
    }
}
