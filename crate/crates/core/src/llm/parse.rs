//! Total parsers for model output. Neither function can fail: an empty result
//! is the failure signal, and callers decide on the fallback.

use serde_json::Value;

/// Every JSON array found in `raw`, scanning left to right from each `[`.
fn json_arrays(raw: &str) -> impl Iterator<Item = Vec<Value>> + '_ {
    raw.match_indices('[').filter_map(move |(i, _)| {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Vec<Value>>();
        stream.next().and_then(Result::ok)
    })
}

fn strip_enumeration(line: &str) -> &str {
    let mut s = line.trim();
    loop {
        let before = s;
        if let Some(rest) = s.strip_prefix(['-', '*', '•']) {
            s = rest.trim_start();
        }
        let digits = s.len() - s.trim_start_matches(|c: char| c.is_ascii_digit()).len();
        if digits > 0 {
            if let Some(rest) = s[digits..].strip_prefix(['.', ')', ':']) {
                s = rest.trim_start();
            }
        }
        if s == before {
            break;
        }
    }
    s.trim_end_matches(',')
        .trim()
        .trim_matches(|c| c == '"' || c == '\'' || c == '“' || c == '”')
        .trim()
}

/// Parses generated label texts: a JSON array of strings when the text holds
/// one, otherwise one label per line with enumeration markers and quotes
/// stripped. Empty entries are dropped; at most `expected` are kept.
pub fn parse_label_list(raw: &str, expected: usize) -> Vec<String> {
    let from_json = json_arrays(raw).find_map(|items| {
        items
            .iter()
            .map(|v| v.as_str().map(str::to_owned))
            .collect::<Option<Vec<String>>>()
    });
    let items: Vec<String> = match from_json {
        Some(items) => items.into_iter().map(|s| s.trim().to_string()).collect(),
        None => raw
            .lines()
            .map(|l| strip_enumeration(l).to_string())
            .collect(),
    };
    items
        .into_iter()
        .filter(|s| !s.is_empty())
        .take(expected)
        .collect()
}

fn as_index(v: &Value) -> Option<u64> {
    match v {
        Value::Number(n) => n.as_u64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Parses 1-based candidate indices: the first JSON array holding integers,
/// otherwise every run of ASCII digits in order. Out-of-range values are
/// dropped, duplicates keep their first position, and at most `want` remain.
pub fn parse_index_list(raw: &str, candidate_count: usize, want: usize) -> Vec<usize> {
    let from_json: Option<Vec<u64>> = json_arrays(raw).find_map(|items| {
        let ints: Vec<u64> = items.iter().filter_map(as_index).collect();
        (!ints.is_empty()).then_some(ints)
    });
    let values = from_json.unwrap_or_else(|| {
        raw.split(|c: char| !c.is_ascii_digit())
            .filter(|run| !run.is_empty())
            .filter_map(|run| run.parse::<u64>().ok())
            .collect()
    });
    let mut out: Vec<usize> = Vec::new();
    for v in values {
        if out.len() == want {
            break;
        }
        if v >= 1 && v <= candidate_count as u64 && !out.contains(&(v as usize)) {
            out.push(v as usize);
        }
    }
    out
}
