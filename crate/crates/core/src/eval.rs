//! Precision and recall at k over prediction files.
//!
//! Precision divides by k even when fewer than k labels were predicted.
//! Aggregates are macro averages over instances that have ground truth.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde_json::{Map, Value};

use crate::corpus::{read_jsonl, GroundTruth};
use crate::error::{Error, Result};
use crate::rerank::PredictionRecord;

/// Relevant labels among the first `k` predictions.
pub fn hits_at_k(pred: &[String], truth: &BTreeSet<String>, k: usize) -> usize {
    pred.iter().take(k).filter(|l| truth.contains(*l)).count()
}

pub fn precision_at_k(pred: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    hits_at_k(pred, truth, k) as f64 / k as f64
}

pub fn recall_at_k(pred: &[String], truth: &BTreeSet<String>, k: usize) -> f64 {
    assert!(!truth.is_empty(), "recall is undefined for empty truth");
    hits_at_k(pred, truth, k) as f64 / truth.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtK {
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_k: BTreeMap<usize, AtK>,
    pub n_evaluated: usize,
    pub n_skipped: usize,
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

impl EvalReport {
    /// `P@k` keys, then `R@k` keys, then the counts; values rounded to 4
    /// decimals.
    pub fn to_json(&self) -> Value {
        let mut out = Map::new();
        for (k, v) in &self.per_k {
            out.insert(format!("P@{k}"), round4(v.precision).into());
        }
        for (k, v) in &self.per_k {
            out.insert(format!("R@{k}"), round4(v.recall).into());
        }
        out.insert("n_evaluated".into(), self.n_evaluated.into());
        out.insert("n_skipped".into(), self.n_skipped.into());
        Value::Object(out)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("report serializes") + "\n"
    }
}

/// Macro-averaged P@k and R@k. Predictions for uids without ground truth
/// count as skipped; a uid appearing twice is an error.
pub fn evaluate(
    predictions: &[PredictionRecord],
    truth: &GroundTruth,
    ks: &[usize],
) -> Result<EvalReport> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Invalid("evaluation needs ks ≥ 1".into()));
    }
    let mut seen = HashSet::new();
    for p in predictions {
        if !seen.insert(p.uid.as_str()) {
            return Err(Error::DuplicatePrediction(p.uid.clone()));
        }
    }
    // Uid order makes the recall sum independent of file line order.
    let mut judged: Vec<(&PredictionRecord, &BTreeSet<String>)> = predictions
        .iter()
        .filter_map(|p| truth.get(&p.uid).map(|t| (p, t)))
        .collect();
    judged.sort_by(|a, b| a.0.uid.cmp(&b.0.uid));
    let n = judged.len();
    let mut per_k = BTreeMap::new();
    for &k in ks {
        let mut hit_total = 0usize;
        let mut recall_sum = 0.0;
        for (p, t) in &judged {
            let hits = hits_at_k(&p.lids, t, k);
            hit_total += hits;
            recall_sum += hits as f64 / t.len() as f64;
        }
        let at = if n == 0 {
            AtK {
                precision: 0.0,
                recall: 0.0,
            }
        } else {
            AtK {
                precision: hit_total as f64 / (k * n) as f64,
                recall: recall_sum / n as f64,
            }
        };
        per_k.insert(k, at);
    }
    Ok(EvalReport {
        per_k,
        n_evaluated: n,
        n_skipped: predictions.len() - n,
    })
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    Ok(read_jsonl(path.as_ref())?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}
