//! Run configuration: a single JSON file, with dot-path overrides applied on
//! top before it is deserialized and validated.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::demogen::Corruption;
use crate::error::{Error, Result};
use crate::llm::Domain;
use crate::rerank::RerankStrategy;
use crate::retrieval::RetrieverKind;

/// How demonstrations and raw labels are produced for each instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Model-written pseudo inputs, labels attached by retrieval.
    Content,
    /// Retrieved labels first, one model-written pseudo input per label.
    LabelCentric,
    /// Nearest train instances as demonstration inputs.
    Retrieval,
    /// No demonstrations.
    Free,
    /// No demonstrations; retrieved labels listed as hints.
    Hint,
    /// No generation at all: the shortlist is the retriever's top `budget`.
    Retriever,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Self::Content,
        Self::LabelCentric,
        Self::Retrieval,
        Self::Free,
        Self::Hint,
        Self::Retriever,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Content => "content",
            Self::LabelCentric => "label_centric",
            Self::Retrieval => "retrieval",
            Self::Free => "free",
            Self::Hint => "hint",
            Self::Retriever => "retriever",
        }
    }

    pub fn default_n(self) -> usize {
        match self {
            Self::LabelCentric => 30,
            _ => 5,
        }
    }
}

/// Text an instance is represented by when it is itself the retrieval query
/// (label-centric label selection, train neighbors, retriever shortlists,
/// scorer reranking).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryText {
    Title,
    /// Title and content joined by a space. The default.
    TitleContent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub labels: PathBuf,
    pub test: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    #[serde(default = "default_domain")]
    pub domain: Domain,
}

fn default_domain() -> Domain {
    Domain::Product
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum EmbedderConfig {
    Hashing {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        seed: u64,
    },
    Http {
        base_url: String,
        model: String,
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
    },
}

fn default_dim() -> usize {
    64
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self::Hashing {
            dim: default_dim(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RetrieverConfig {
    pub kind: RetrieverKind,
    pub k1: f64,
    pub b: f64,
    pub query_text: QueryText,
    pub embedder: EmbedderConfig,
}

impl Default for RetrieverConfig {
    fn default() -> Self {
        Self {
            kind: RetrieverKind::Bm25,
            k1: 1.2,
            b: 0.75,
            query_text: QueryText::TitleContent,
            embedder: EmbedderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum BackendConfig {
    Mock {
        #[serde(default = "default_seed")]
        seed: u64,
    },
    Http {
        base_url: String,
        model: String,
        /// Environment variable holding the API key.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        #[serde(default = "default_retries")]
        max_retries: u32,
    },
}

fn default_seed() -> u64 {
    42
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    3
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self::Mock {
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub mode: Corruption,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub retriever: RetrieverConfig,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    /// Demonstrations per instance (content and retrieval strategies).
    #[serde(default = "default_m")]
    pub m: usize,
    /// Labels per demonstration; defaults by strategy.
    #[serde(default)]
    pub n: Option<usize>,
    /// Raw labels requested from the model.
    #[serde(default = "default_ten")]
    pub k: usize,
    /// Neighbors per raw label.
    #[serde(default = "default_ten")]
    pub s: usize,
    /// Final predictions per instance.
    #[serde(default = "default_ten")]
    pub top_k: usize,
    /// Size of retriever shortlists (hint and retriever strategies).
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default = "default_rerank")]
    pub rerank: RerankStrategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionConfig>,
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Largest tolerated fraction of failed instances.
    #[serde(default = "default_failure_threshold")]
    pub failure_threshold: f64,
    #[serde(default = "default_eval_ks")]
    pub eval_ks: Vec<usize>,
    /// Whitespace tokens of instance content kept in prompts.
    #[serde(default = "default_content_max_tokens")]
    pub content_max_tokens: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
}

fn default_strategy() -> Strategy {
    Strategy::Content
}
fn default_m() -> usize {
    5
}
fn default_ten() -> usize {
    10
}
fn default_budget() -> usize {
    100
}
fn default_max_output_tokens() -> u32 {
    512
}
fn default_concurrency() -> usize {
    4
}
fn default_rerank() -> RerankStrategy {
    RerankStrategy::Llm
}
fn default_failure_threshold() -> f64 {
    0.01
}
fn default_eval_ks() -> Vec<usize> {
    vec![1, 3, 5, 10]
}
fn default_content_max_tokens() -> usize {
    1000
}

/// Sets `path` (dot separated) in `root` to `raw`, read as JSON when it
/// parses and as a string otherwise. Intermediate objects are created.
pub fn apply_override(root: &mut Value, path: &str, raw: &str) -> Result<()> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("malformed override key `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("`{path}`: `{key}` is not inside an object")))?;
        node = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("`{path}` does not name an object field")))?;
    obj.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn sort_keys(v: &Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            Value::Object(
                keys.into_iter()
                    .map(|k| (k.clone(), sort_keys(&map[k])))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.iter().map(sort_keys).collect()),
        other => other.clone(),
    }
}

impl PipelineConfig {
    /// Parses `value`, resolves relative paths against `base_dir`, fills the
    /// strategy-dependent defaults and validates.
    pub fn from_value(value: Value, base_dir: &Path) -> Result<Self> {
        let mut config: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.resolve_paths(base_dir);
        config.n.get_or_insert(config.strategy.default_n());
        config.validate()?;
        Ok(config)
    }

    /// Reads `path` and applies `overrides` (`("retriever.kind", "bm25")`).
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut value: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_value(value, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.labels);
        fix(&mut self.dataset.test);
        self.dataset.train.as_mut().map(fix);
        self.dataset.truth.as_mut().map(fix);
        fix(&mut self.output_dir);
        self.cache_dir.as_mut().map(fix);
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("n", self.n()),
            ("k", self.k),
            ("s", self.s),
            ("top_k", self.top_k),
            ("budget", self.budget),
            ("concurrency", self.concurrency),
            ("content_max_tokens", self.content_max_tokens),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be at least 1")));
            }
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(
                "`temperature` must be a non-negative number".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.failure_threshold) {
            return Err(Error::Config(
                "`failure_threshold` must lie in [0, 1]".into(),
            ));
        }
        if self.eval_ks.is_empty() || self.eval_ks.contains(&0) {
            return Err(Error::Config(
                "`eval_ks` must be non-empty and positive".into(),
            ));
        }
        if let Some(r) = self.requests_per_second {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(
                    "`requests_per_second` must be positive".into(),
                ));
            }
        }
        if self.strategy == Strategy::Retrieval && self.dataset.train.is_none() {
            return Err(Error::Config(
                "strategy `retrieval` needs `dataset.train`".into(),
            ));
        }
        if !(self.retriever.k1 >= 0.0 && (0.0..=1.0).contains(&self.retriever.b)) {
            return Err(Error::Config("bm25 needs k1 ≥ 0 and b in [0, 1]".into()));
        }
        Ok(())
    }

    /// Labels per demonstration after the strategy default is applied.
    pub fn n(&self) -> usize {
        self.n.unwrap_or(self.strategy.default_n())
    }

    /// Hex SHA-256 of the canonical (key-sorted) JSON of every setting that
    /// can change predictions. Output and cache locations, concurrency and
    /// rate limits are left out.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let obj = value.as_object_mut().expect("config is an object");
        for key in [
            "output_dir",
            "cache_dir",
            "concurrency",
            "requests_per_second",
            "failure_threshold",
        ] {
            obj.remove(key);
        }
        obj.insert("n".into(), self.n().into());
        let canonical = serde_json::to_vec(&sort_keys(&value)).expect("value serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}
