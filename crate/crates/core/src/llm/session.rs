use std::cell::Cell;

use serde::{Deserialize, Serialize};

use super::template::{render_prompt, Bindings, Domain, TemplateId, TemplateKind};
use super::{cache_key, Gateway, LlmResponse};
use crate::corpus::Instance;
use crate::error::Result;
use crate::retrieval::tokenize::truncate_whitespace_tokens;

/// Model calls made for one instance, by template.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub t1: u32,
    pub t2: u32,
    pub t3: u32,
    pub t3h: u32,
    pub t4: u32,
}

impl CallCounts {
    pub fn total(&self) -> u32 {
        self.t1 + self.t2 + self.t3 + self.t3h + self.t4
    }

    pub fn add(&mut self, other: &CallCounts) {
        self.t1 += other.t1;
        self.t2 += other.t2;
        self.t3 += other.t3;
        self.t3h += other.t3h;
        self.t4 += other.t4;
    }

    fn bump(&mut self, kind: TemplateKind) {
        match kind {
            TemplateKind::ContentDemos => self.t1 += 1,
            TemplateKind::LabelDemos => self.t2 += 1,
            TemplateKind::Inference => self.t3 += 1,
            TemplateKind::HintInference => self.t3h += 1,
            TemplateKind::Rerank => self.t4 += 1,
        }
    }
}

/// Per-instance handle on the gateway: renders the domain's templates,
/// truncates instance content to the prompt budget and tallies calls.
pub struct PromptSession<'a> {
    gateway: &'a Gateway,
    domain: Domain,
    max_content_tokens: usize,
    calls: Cell<CallCounts>,
}

impl<'a> PromptSession<'a> {
    pub const DEFAULT_MAX_CONTENT_TOKENS: usize = 1000;

    pub fn new(gateway: &'a Gateway, domain: Domain, max_content_tokens: usize) -> Self {
        Self {
            gateway,
            domain,
            max_content_tokens,
            calls: Cell::new(CallCounts::default()),
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn content_of<'x>(&self, x: &'x Instance) -> &'x str {
        truncate_whitespace_tokens(&x.content, self.max_content_tokens)
    }

    /// Renders `kind` for this session's domain and sends it. Returns the
    /// request's cache key with the response.
    pub fn complete(
        &self,
        kind: TemplateKind,
        bindings: &Bindings<'_>,
    ) -> Result<(String, LlmResponse)> {
        let prompt = render_prompt(TemplateId::new(kind, self.domain), bindings)?;
        let request = self.gateway.request(prompt);
        let key = cache_key(&request);
        let mut calls = self.calls.get();
        calls.bump(kind);
        self.calls.set(calls);
        let response = self.gateway.complete(&request)?;
        Ok((key, response))
    }

    pub fn calls(&self) -> CallCounts {
        self.calls.get()
    }
}
