/// Lowercases, then splits on every non-alphanumeric codepoint. No stemming,
/// no stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Keeps the first `max_tokens` whitespace-delimited tokens of `text`,
/// preserving the original spacing between them.
pub fn truncate_whitespace_tokens(text: &str, max_tokens: usize) -> &str {
    let mut seen = 0;
    let mut in_token = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if in_token {
                in_token = false;
                if seen == max_tokens {
                    return &text[..i];
                }
            }
        } else if !in_token {
            if seen == max_tokens {
                return text[..i].trim_end();
            }
            in_token = true;
            seen += 1;
        }
    }
    text
}
