//! Datasets: test/train instances, the label space and evaluation ground truth.
//!
//! Every file is line-delimited JSON, one record per line. Blank lines are
//! ignored; anything else that fails to parse is reported with its 1-based
//! line number.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub uid: String,
    pub title: String,
    #[serde(default)]
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub lid: String,
    pub text: String,
}

/// The full output space, addressed both by ordinal and by label id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<Label>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct LabelRecord {
    uid: String,
    title: String,
}

#[derive(Serialize)]
struct LabelRecordOut<'a> {
    uid: &'a str,
    title: &'a str,
}

#[derive(Debug, Deserialize)]
struct TruthRecord {
    uid: String,
    labels: Vec<String>,
}

impl LabelSpace {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyLabelSpace);
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (ordinal, label) in labels.iter().enumerate() {
            if label.lid.is_empty() {
                return Err(Error::Invalid(format!(
                    "label at ordinal {ordinal} has an empty uid"
                )));
            }
            if label.text.is_empty() {
                return Err(Error::Invalid(format!(
                    "label `{}` has empty text",
                    label.lid
                )));
            }
            if index.insert(label.lid.clone(), ordinal).is_some() {
                return Err(Error::DuplicateId(label.lid.clone()));
            }
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, ordinal: usize) -> Option<&Label> {
        self.labels.get(ordinal)
    }

    pub fn ordinal(&self, lid: &str) -> Option<usize> {
        self.index.get(lid).copied()
    }

    pub fn contains(&self, lid: &str) -> bool {
        self.index.contains_key(lid)
    }

    pub fn text_of(&self, lid: &str) -> Option<&str> {
        self.ordinal(lid).map(|o| self.labels[o].text.as_str())
    }

    pub fn texts(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.text.as_str()).collect()
    }

    /// Serializes back to the line format accepted by [`load_label_space`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for label in &self.labels {
            let record = LabelRecordOut {
                uid: &label.lid,
                title: &label.text,
            };
            out.push_str(&serde_json::to_string(&record).expect("label record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Relevance judgements, keyed by instance uid. Evaluation only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    relevance: BTreeMap<String, BTreeSet<String>>,
    /// Records dropped because their label list was empty.
    pub skipped_empty: usize,
}

impl GroundTruth {
    pub fn get(&self, uid: &str) -> Option<&BTreeSet<String>> {
        self.relevance.get(uid)
    }

    pub fn len(&self) -> usize {
        self.relevance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevance.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BTreeSet<String>)> {
        self.relevance.iter()
    }

    pub fn insert(&mut self, uid: impl Into<String>, lids: impl IntoIterator<Item = String>) {
        let set: BTreeSet<String> = lids.into_iter().collect();
        if set.is_empty() {
            self.skipped_empty += 1;
        } else {
            self.relevance.insert(uid.into(), set);
        }
    }
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(path, &text)
}

pub(crate) fn parse_jsonl<T: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, record));
    }
    Ok(out)
}

pub fn load_label_space(path: impl AsRef<Path>) -> Result<LabelSpace> {
    let path = path.as_ref();
    let records: Vec<(usize, LabelRecord)> = read_jsonl(path)?;
    let mut labels = Vec::with_capacity(records.len());
    for (line, r) in records {
        if r.uid.is_empty() || r.title.is_empty() {
            return Err(Error::Record {
                path: path.to_path_buf(),
                line,
                message: "label uid and title must be non-empty".into(),
            });
        }
        labels.push(Label {
            lid: r.uid,
            text: r.title,
        });
    }
    LabelSpace::new(labels)
}

pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let path = path.as_ref();
    let records: Vec<(usize, Instance)> = read_jsonl(path)?;
    let mut seen = HashSet::with_capacity(records.len());
    let mut out = Vec::with_capacity(records.len());
    for (line, inst) in records {
        if inst.uid.is_empty() || inst.title.is_empty() {
            return Err(Error::Record {
                path: path.to_path_buf(),
                line,
                message: "instance uid and title must be non-empty".into(),
            });
        }
        if !seen.insert(inst.uid.clone()) {
            return Err(Error::DuplicateId(inst.uid));
        }
        out.push(inst);
    }
    Ok(out)
}

/// Loads ground truth, validating every label id against `space`.
pub fn load_ground_truth(path: impl AsRef<Path>, space: &LabelSpace) -> Result<GroundTruth> {
    let path = path.as_ref();
    let records: Vec<(usize, TruthRecord)> = read_jsonl(path)?;
    let mut truth = GroundTruth::default();
    for (_, r) in records {
        if let Some(lid) = r.labels.iter().find(|lid| !space.contains(lid)) {
            return Err(Error::UnknownLabel {
                uid: r.uid.clone(),
                lid: lid.clone(),
            });
        }
        if truth.relevance.contains_key(&r.uid) {
            return Err(Error::DuplicateId(r.uid));
        }
        truth.insert(r.uid, r.labels);
    }
    if truth.skipped_empty > 0 {
        log::warn!(
            "{}: skipped {} ground-truth records with no labels",
            path.display(),
            truth.skipped_empty
        );
    }
    Ok(truth)
}

pub fn write_label_space(path: impl AsRef<Path>, space: &LabelSpace) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(space.to_jsonl().as_bytes())
        .map_err(|e| Error::io(path, e))
}
