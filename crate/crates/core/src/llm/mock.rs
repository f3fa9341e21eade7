//! Deterministic offline stand-in for the language model.
//!
//! The mock reads the rendered prompt, recognizes which template produced it
//! and answers in that template's output format:
//!
//! * t1: JSON array of pseudo titles built from seeded picks of the test
//!   instance's words.
//! * t2: JSON array with one pseudo title per candidate label, built from
//!   the label's own words plus one word of the test title.
//! * t3: the label texts of the prompt's demonstrations, one per numbered
//!   line (echo); with no demonstrations, pseudo titles from the instance
//!   and any hint labels.
//! * t4: a seeded permutation of the valid candidate indices.
//!
//! Every answer is a pure function of (prompt bytes, seed).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, Usage};
use crate::retrieval::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockBackend {
    pub seed: u64,
}

impl MockBackend {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn hash(&self, parts: &[&[u8]]) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p);
        }
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    /// 2-4 words drawn from `pool`, keyed by `salt`.
    fn pseudo_title(&self, pool: &[String], salt: &[&[u8]]) -> String {
        let h = self.hash(salt);
        if pool.is_empty() {
            return format!("item {}", h % 1000);
        }
        let words = 2 + (h % 3) as usize;
        let mut out: Vec<&str> = Vec::with_capacity(words);
        for i in 0..words {
            let pick = self.hash(&[&h.to_le_bytes(), &(i as u64).to_le_bytes()]);
            let w = pool[(pick % pool.len() as u64) as usize].as_str();
            if !out.contains(&w) {
                out.push(w);
            }
        }
        out.join(" ")
    }

    pub fn respond(&self, prompt: &str) -> String {
        if prompt.contains("\nCandidates:\n")
            && prompt.contains("representing the indices of the top")
        {
            self.rerank(prompt)
        } else if prompt.contains("the list should be of size ") {
            self.label_demos(prompt)
        } else if prompt.contains("relevant and diverse") {
            self.content_demos(prompt)
        } else {
            self.inference(prompt)
        }
    }

    fn content_demos(&self, prompt: &str) -> String {
        let count = number_after(prompt, "at least ").unwrap_or(5);
        let title = line_value(prompt, &["Product title: ", "Wiki title: "]).unwrap_or_default();
        let content =
            line_value(prompt, &["Product Description: ", "Wiki content: "]).unwrap_or_default();
        let mut pool = tokenize(title);
        pool.extend(tokenize(content).into_iter().take(40));
        let titles: Vec<String> = (0..count)
            .map(|j| {
                self.pseudo_title(
                    &pool,
                    &[
                        b"t1",
                        title.as_bytes(),
                        content.as_bytes(),
                        &(j as u64).to_le_bytes(),
                    ],
                )
            })
            .collect();
        serde_json::to_string(&titles).expect("strings serialize")
    }

    fn label_demos(&self, prompt: &str) -> String {
        let title =
            line_value(prompt, &["Product title: ", "As 'See Also' pages of "]).unwrap_or_default();
        let title_words = tokenize(title);
        let labels = numbered_after(
            prompt,
            &[
                "Candidate labels:",
                "There's a list of Wikipedia page titles:",
            ],
        );
        let titles: Vec<String> = labels
            .iter()
            .map(|label| {
                let words = tokenize(label);
                let h = self.hash(&[b"t2", label.as_bytes()]);
                let mut out: Vec<&str> = Vec::new();
                if !words.is_empty() {
                    out.push(&words[(h % words.len() as u64) as usize]);
                    if words.len() > 2 {
                        let second = &words[((h >> 16) % words.len() as u64) as usize];
                        if !out.contains(&second.as_str()) {
                            out.push(second);
                        }
                    }
                }
                if !title_words.is_empty() {
                    let w = &title_words[((h >> 32) % title_words.len() as u64) as usize];
                    if !out.contains(&w.as_str()) {
                        out.push(w);
                    }
                }
                if out.is_empty() {
                    format!("item {}", h % 1000)
                } else {
                    out.join(" ")
                }
            })
            .collect();
        serde_json::to_string(&titles).expect("strings serialize")
    }

    fn inference(&self, prompt: &str) -> String {
        let count = number_after(prompt, "Please predict at least ").unwrap_or(10);
        let mut echoed: Vec<String> = Vec::new();
        for line in prompt.lines() {
            let labels = line
                .strip_prefix("Relevant product: ")
                .or_else(|| line.strip_prefix("'See Also' pages: "));
            if let Some(Ok(list)) = labels.map(serde_json::from_str::<Vec<String>>) {
                for l in list {
                    if !echoed.contains(&l) {
                        echoed.push(l);
                    }
                }
            }
        }
        let lines: Vec<String> = if echoed.is_empty() {
            let title = test_title(prompt);
            let hints = numbered_after(prompt, &["Hints:"]);
            let mut pool = tokenize(title);
            for h in &hints {
                pool.extend(tokenize(h));
            }
            (0..count)
                .map(|j| {
                    self.pseudo_title(
                        &pool,
                        &[b"t3", prompt.as_bytes(), &(j as u64).to_le_bytes()],
                    )
                })
                .collect()
        } else {
            echoed.into_iter().take(count).collect()
        };
        lines
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{}. {l}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn rerank(&self, prompt: &str) -> String {
        let want = number_after(prompt, "indices of the top ").unwrap_or(10);
        let count = numbered_after(prompt, &["Candidates:"]).len();
        let mut indices: Vec<usize> = (1..=count).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.hash(&[b"t4", prompt.as_bytes()]));
        indices.shuffle(&mut rng);
        indices.truncate(want);
        let items: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
        format!("[{}]", items.join(", "))
    }
}

fn number_after(text: &str, marker: &str) -> Option<usize> {
    let start = text.find(marker)? + marker.len();
    let digits: String = text[start..]
        .chars()
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

fn line_value<'a>(text: &'a str, prefixes: &[&str]) -> Option<&'a str> {
    text.lines()
        .find_map(|l| prefixes.iter().find_map(|p| l.strip_prefix(p)))
}

/// Item texts of the numbered list directly following a header line.
fn numbered_after(text: &str, headers: &[&str]) -> Vec<String> {
    let mut lines = text.lines();
    if !lines.by_ref().any(|l| headers.contains(&l)) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        match line.strip_prefix(&format!("{}. ", i + 1)) {
            Some(item) => out.push(item.to_string()),
            None => break,
        }
    }
    out
}

/// The test title in an inference prompt: the line after the product task
/// line, or the wiki "Title: " line.
fn test_title(prompt: &str) -> &str {
    let mut lines = prompt.lines();
    while let Some(l) = lines.next() {
        if l.starts_with("Task: Please predict at least ") {
            return lines.next().unwrap_or_default();
        }
        if let Some(t) = l.strip_prefix("Title: ") {
            return t;
        }
    }
    ""
}

impl LlmBackend for MockBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let prompt = request.prompt();
        let text = self.respond(prompt);
        Ok(LlmResponse {
            usage: Usage {
                prompt_tokens: prompt.split_whitespace().count() as u64,
                completion_tokens: text.split_whitespace().count() as u64,
            },
            text,
            cached: false,
            retries: 0,
        })
    }

    fn model_name(&self) -> String {
        format!("mock-seed-{}", self.seed)
    }
}
