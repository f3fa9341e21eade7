//! Blocking client for OpenAI-compatible `/chat/completions` endpoints.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, Message, Usage};

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each subsequent one.
    pub backoff: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            max_retries: 3,
            backoff: Duration::from_secs(1),
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    config: HttpConfig,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("endpoint", &self.endpoint)
            .field("model", &self.config.model)
            .finish()
    }
}

enum Attempt {
    Done(LlmResponse),
    Retry {
        status: Option<u16>,
        message: String,
    },
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        let endpoint = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(Self {
            client,
            endpoint,
            config,
        })
    }

    fn attempt(&self, request: &LlmRequest) -> Attempt {
        let body = ChatRequest {
            model: &request.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_output_tokens,
        };
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = match builder.send() {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Retry {
                    status: None,
                    message: e.to_string(),
                }
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Retry {
                    status: Some(status),
                    message: e.to_string(),
                }
            }
        };
        match status {
            200..=299 => match serde_json::from_str::<ChatResponse>(&text) {
                Ok(parsed) => {
                    let Some(choice) = parsed.choices.into_iter().next() else {
                        return Attempt::Fatal(LlmError::Protocol(
                            "response has no choices".into(),
                        ));
                    };
                    let usage = parsed.usage.map_or(Usage::default(), |u| Usage {
                        prompt_tokens: u.prompt_tokens,
                        completion_tokens: u.completion_tokens,
                    });
                    Attempt::Done(LlmResponse {
                        text: choice.message.content.unwrap_or_default(),
                        usage,
                        cached: false,
                        retries: 0,
                    })
                }
                Err(e) => Attempt::Fatal(LlmError::Protocol(format!("unparseable body: {e}"))),
            },
            401 | 403 => Attempt::Fatal(LlmError::Credential { status }),
            408 | 409 | 429 | 500..=599 => Attempt::Retry {
                status: Some(status),
                message: snippet(&text),
            },
            _ => Attempt::Fatal(LlmError::Protocol(format!(
                "HTTP {status}: {}",
                snippet(&text)
            ))),
        }
    }
}

fn snippet(text: &str) -> String {
    text.chars().take(200).collect()
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let mut delay = self.config.backoff;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(request) {
                Attempt::Done(mut resp) => {
                    resp.retries = attempts - 1;
                    return Ok(resp);
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry { status, message } => {
                    if attempts > self.config.max_retries {
                        return Err(LlmError::Transport {
                            status,
                            attempts,
                            message,
                        });
                    }
                    log::warn!(
                        "transient failure from {} ({status:?}); retrying in {delay:?}",
                        self.endpoint
                    );
                    std::thread::sleep(delay);
                    delay *= 2;
                }
            }
        }
    }

    fn model_name(&self) -> String {
        self.config.model.clone()
    }
}
