//! Everything that talks to the language model: prompt templates, backends
//! (OpenAI-compatible HTTP and a deterministic mock), output parsers and a
//! response cache.

mod cache;
mod http;
mod mock;
pub mod parse;
mod session;
pub mod template;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::ResponseCache;
pub use http::{HttpBackend, HttpConfig};
pub use mock::MockBackend;
pub use parse::{parse_index_list, parse_label_list};
pub use session::{CallCounts, PromptSession};
pub use template::{render_prompt, Bindings, DemoText, Domain, TemplateId, TemplateKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model_name: String,
}

impl LlmRequest {
    pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 512;

    /// A single-turn request carrying `prompt` as the user message.
    pub fn user(model_name: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            messages: vec![Message {
                role: "user".into(),
                content: prompt.into(),
            }],
            temperature: 0.0,
            max_output_tokens: Self::DEFAULT_MAX_OUTPUT_TOKENS,
            model_name: model_name.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, max: u32) -> Self {
        self.max_output_tokens = max;
        self
    }

    /// Text of the last user message; what the mock backend responds to.
    pub fn prompt(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .or(self.messages.last())
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
    pub cached: bool,
    /// Transient failures retried before this response arrived.
    pub retries: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LlmError {
    #[error("transport failure after {attempts} attempts (last status {status:?}): {message}")]
    Transport {
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    #[error("credential rejected (HTTP {status})")]
    Credential { status: u16 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;

    /// Model name put on requests built for this backend.
    fn model_name(&self) -> String;
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    temperature: f64,
    messages: &'a [Message],
}

/// Hex SHA-256 over model name, temperature and the serialized messages.
pub fn cache_key(request: &LlmRequest) -> String {
    let material = KeyMaterial {
        model: &request.model_name,
        temperature: request.temperature,
        messages: &request.messages,
    };
    let bytes = serde_json::to_vec(&material).expect("request serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Spaces out request starts to at most `per_second` across all threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        assert!(rate > 0.0, "rate must be positive");
        Self {
            interval: Duration::from_secs_f64(1.0 / rate),
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().unwrap();
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Default)]
pub struct GatewayStats {
    pub calls: AtomicU64,
    pub cache_hits: AtomicU64,
    pub retries: AtomicU64,
    pub prompt_tokens: AtomicU64,
    pub completion_tokens: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewaySnapshot {
    pub calls: u64,
    pub cache_hits: u64,
    pub retries: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// A backend plus the shared machinery around it: cache, rate limit and
/// usage accounting. Safe to share across worker threads.
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    cache: Option<ResponseCache>,
    limiter: Option<RateLimiter>,
    temperature: f64,
    max_output_tokens: u32,
    stats: GatewayStats,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Self {
            backend,
            cache: None,
            limiter: None,
            temperature: 0.0,
            max_output_tokens: LlmRequest::DEFAULT_MAX_OUTPUT_TOKENS,
            stats: GatewayStats::default(),
        }
    }

    pub fn with_cache(mut self, cache: ResponseCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_rate_limit(mut self, per_second: f64) -> Self {
        self.limiter = Some(RateLimiter::per_second(per_second));
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_max_output_tokens(mut self, max: u32) -> Self {
        self.max_output_tokens = max;
        self
    }

    /// Builds the request this gateway would send for `prompt`.
    pub fn request(&self, prompt: impl Into<String>) -> LlmRequest {
        LlmRequest::user(self.backend.model_name(), prompt)
            .with_temperature(self.temperature)
            .with_max_output_tokens(self.max_output_tokens)
    }

    pub fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let key = self.cache.as_ref().map(|_| cache_key(request));
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            if let Some(text) = cache.get(key) {
                self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(LlmResponse {
                    text,
                    usage: Usage::default(),
                    cached: true,
                    retries: 0,
                });
            }
        }
        if let Some(limiter) = &self.limiter {
            limiter.acquire();
        }
        let response = self.backend.complete(request)?;
        self.stats.calls.fetch_add(1, Ordering::Relaxed);
        self.stats
            .retries
            .fetch_add(response.retries as u64, Ordering::Relaxed);
        self.stats
            .prompt_tokens
            .fetch_add(response.usage.prompt_tokens, Ordering::Relaxed);
        self.stats
            .completion_tokens
            .fetch_add(response.usage.completion_tokens, Ordering::Relaxed);
        if let (Some(cache), Some(key)) = (&self.cache, &key) {
            cache.put(key, &response.text);
        }
        Ok(response)
    }

    pub fn snapshot(&self) -> GatewaySnapshot {
        GatewaySnapshot {
            calls: self.stats.calls.load(Ordering::Relaxed),
            cache_hits: self.stats.cache_hits.load(Ordering::Relaxed),
            retries: self.stats.retries.load(Ordering::Relaxed),
            prompt_tokens: self.stats.prompt_tokens.load(Ordering::Relaxed),
            completion_tokens: self.stats.completion_tokens.load(Ordering::Relaxed),
        }
    }
}
