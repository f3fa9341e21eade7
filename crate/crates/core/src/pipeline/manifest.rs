//! Run manifest: what ran, with which configuration, and what it cost.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::PipelineConfig;
use super::files::write_atomic;
use crate::error::{Error, Result};
use crate::llm::{CallCounts, GatewaySnapshot};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceCounts {
    pub total: usize,
    /// Instances worked on by this invocation.
    pub processed: usize,
    /// Instances skipped because an earlier invocation finished them.
    pub resumed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FallbackCounts {
    /// Demonstration generation yielded nothing; inference ran without.
    pub empty_demonstrations: usize,
    /// Generation mapped to an empty shortlist; the retriever's was used.
    pub retriever_shortlist: usize,
    /// Rerank call failed; heuristic order was used.
    pub rerank_heuristic: usize,
    /// Predictions padded from heuristic order.
    pub padded_predictions: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub load_ms: u64,
    pub index_ms: u64,
    /// Summed over workers.
    pub demonstrations_ms: u64,
    pub shortlist_ms: u64,
    pub rerank_ms: u64,
    pub evaluate_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_digest: String,
    pub config: PipelineConfig,
    /// Hex SHA-256 of each dataset file's bytes.
    pub dataset_digests: BTreeMap<String, String>,
    pub model: String,
    pub instances: InstanceCounts,
    pub calls_by_template: CallCounts,
    pub max_calls_per_instance: u32,
    pub gateway: GatewaySnapshot,
    pub fallbacks: FallbackCounts,
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig, model: String) -> Result<Self> {
        Ok(Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_digest: config.digest(),
            config: config.clone(),
            dataset_digests: dataset_digests(config)?,
            model,
            instances: InstanceCounts::default(),
            calls_by_template: CallCounts::default(),
            max_calls_per_instance: 0,
            gateway: GatewaySnapshot::default(),
            fallbacks: FallbackCounts::default(),
            timing: Timing::default(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })
    }
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn dataset_digests(config: &PipelineConfig) -> Result<BTreeMap<String, String>> {
    let d = &config.dataset;
    let mut out = BTreeMap::new();
    out.insert("labels".to_string(), file_digest(&d.labels)?);
    out.insert("test".to_string(), file_digest(&d.test)?);
    if let Some(p) = &d.train {
        out.insert("train".to_string(), file_digest(p)?);
    }
    if let Some(p) = &d.truth {
        out.insert("truth".to_string(), file_digest(p)?);
    }
    Ok(out)
}
