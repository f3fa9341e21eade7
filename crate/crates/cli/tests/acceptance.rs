//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed.
//!
//! Set UPDATE_GOLDEN=1 to rewrite the committed end-to-end goldens.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use genrank::corpus::{Instance, Label, LabelSpace};
use genrank::eval::{precision_at_k, recall_at_k};
use genrank::llm::{
    parse_index_list, parse_label_list, Domain, Gateway, LlmBackend, LlmError, LlmRequest,
    LlmResponse, MockBackend, PromptSession, Usage,
};
use genrank::pipeline::RunManifest;
use genrank::rerank::{rerank_heuristic, rerank_llm};
use genrank::retrieval::{Bm25Params, HashingEmbedder, RetrieverIndex, RetrieverKind};
use genrank::shortlist::{map_to_label_space, union_rows, Neighbor, NeighborMatrix, RawGeneration};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < budget, || {
        format!("took {took:.2?}, budget {budget:?}")
    })?;
    Ok(took)
}

// ---------------------------------------------------------------------------
// Independent scoring oracles.

fn oracle_tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in lower.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn doc_freq<'a>(counts: &[HashMap<&'a str, u32>]) -> HashMap<&'a str, f64> {
    let mut df = HashMap::new();
    for c in counts {
        for t in c.keys() {
            *df.entry(*t).or_insert(0.0) += 1.0;
        }
    }
    df
}

fn term_counts(tokens: &[String]) -> HashMap<&str, u32> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}

/// Scores every document, sorts by score descending then ordinal.
fn rank_all(scores: Vec<f64>, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

fn bm25_oracle(docs: &[String], query: &str, n: usize, k1: f64, b: f64) -> Vec<usize> {
    let q = oracle_tokens(query);
    if q.is_empty() {
        return Vec::new();
    }
    let toks: Vec<Vec<String>> = docs.iter().map(|d| oracle_tokens(d)).collect();
    let counts: Vec<HashMap<&str, u32>> = toks.iter().map(|t| term_counts(t)).collect();
    let nd = docs.len() as f64;
    let dfs = doc_freq(&counts);
    let avgdl = toks.iter().map(|t| t.len() as u64).sum::<u64>() as f64 / nd;
    let scores = (0..docs.len())
        .map(|d| {
            let dl = toks[d].len() as f64;
            let norm = if avgdl > 0.0 {
                k1 * (1.0 - b + b * dl / avgdl)
            } else {
                k1 * (1.0 - b)
            };
            let mut s = 0.0;
            for term in &q {
                let Some(&tf) = counts[d].get(term.as_str()) else {
                    continue;
                };
                let df = dfs[term.as_str()];
                let idf = (1.0 + (nd - df + 0.5) / (df + 0.5)).ln();
                let tf = tf as f64;
                s += idf * (tf * (k1 + 1.0)) / (tf + norm);
            }
            s
        })
        .collect();
    rank_all(scores, n)
}

fn tfidf_oracle(docs: &[String], query: &str, n: usize) -> Vec<usize> {
    let q = oracle_tokens(query);
    if q.is_empty() {
        return Vec::new();
    }
    let toks: Vec<Vec<String>> = docs.iter().map(|d| oracle_tokens(d)).collect();
    let counts: Vec<HashMap<&str, u32>> = toks.iter().map(|t| term_counts(t)).collect();
    let nd = docs.len() as f64;
    let dfs = doc_freq(&counts);
    let idf = |term: &str| ((nd + 1.0) / (dfs[term] + 1.0)).ln() + 1.0;
    // Query vector over in-vocabulary terms, first-occurrence order.
    let mut qterms: Vec<(&str, u32)> = Vec::new();
    for t in &q {
        if dfs.contains_key(t.as_str()) {
            match qterms.iter_mut().find(|(x, _)| *x == t.as_str()) {
                Some((_, c)) => *c += 1,
                None => qterms.push((t.as_str(), 1)),
            }
        }
    }
    let qw: Vec<f64> = qterms.iter().map(|(t, c)| *c as f64 * idf(t)).collect();
    let qnorm = qw.iter().map(|w| w * w).sum::<f64>().sqrt();
    let scores = (0..docs.len())
        .map(|d| {
            let mut terms: Vec<&&str> = counts[d].keys().collect();
            terms.sort();
            let sq: f64 = terms.iter().fold(0.0, |acc, t| {
                let w = counts[d][**t] as f64 * idf(t);
                acc + w * w
            });
            let dnorm = sq.sqrt();
            let mut dot = 0.0;
            for ((t, _), w) in qterms.iter().zip(&qw) {
                if let Some(&tf) = counts[d].get(t) {
                    dot += w * (tf as f64 * idf(t) / dnorm);
                }
            }
            if dot == 0.0 {
                0.0
            } else {
                dot / qnorm
            }
        })
        .collect();
    rank_all(scores, n)
}

fn random_corpus(rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let vocab_size = rng.random_range(5..400);
    let vocab: Vec<String> = (0..vocab_size).map(|i| format!("w{i}")).collect();
    let ndocs = rng.random_range(1..=2000);
    let docs = (0..ndocs)
        .map(|_| {
            let len = rng.random_range(0..12);
            let words: Vec<&str> = (0..len)
                .map(|_| {
                    // Skewed draw so some terms are frequent.
                    let u: f64 = rng.random();
                    vocab[((u * u) * vocab_size as f64) as usize].as_str()
                })
                .collect();
            words.join(if rng.random_bool(0.5) { " " } else { ", " })
        })
        .collect();
    let queries = (0..20)
        .map(|_| {
            let len = rng.random_range(0..6);
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        "unseenterm".to_string()
                    } else {
                        vocab.choose(rng).unwrap().to_uppercase()
                    }
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    (docs, queries)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = Bm25Params::default();
    let mut compared = 0;
    for corpus in 0..50 {
        let (docs, queries) = random_corpus(&mut rng);
        let bm25 = RetrieverIndex::build(&docs, RetrieverKind::Bm25, params, None)
            .map_err(|e| e.to_string())?;
        let tfidf = RetrieverIndex::build(&docs, RetrieverKind::Tfidf, params, None)
            .map_err(|e| e.to_string())?;
        for q in &queries {
            let n = *[1usize, 5, 10, 50].choose(&mut rng).unwrap();
            let got: Vec<usize> = bm25
                .top_n(q, n)
                .unwrap()
                .iter()
                .map(|h| h.doc_ordinal)
                .collect();
            let want = bm25_oracle(&docs, q, n, params.k1, params.b);
            check(got == want, || {
                format!("bm25 corpus {corpus} query {q:?}: {got:?} != {want:?}")
            })?;
            let got: Vec<usize> = tfidf
                .top_n(q, n)
                .unwrap()
                .iter()
                .map(|h| h.doc_ordinal)
                .collect();
            let want = tfidf_oracle(&docs, q, n);
            check(got == want, || {
                format!("tfidf corpus {corpus} query {q:?}: {got:?} != {want:?}")
            })?;
            compared += 2;
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{compared} rankings identical to exhaustive scoring ({took:.2?})"
    ))
}

// ---------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..1000 {
        let pool = rng.random_range(1..40);
        let plen = rng.random_range(0..15);
        let mut pred: Vec<String> = Vec::new();
        while pred.len() < plen.min(pool) {
            let l = format!("l{}", rng.random_range(0..pool));
            if !pred.contains(&l) {
                pred.push(l);
            }
        }
        let tlen = rng.random_range(1..=pool.min(10));
        let truth: BTreeSet<String> = (0..tlen)
            .map(|_| format!("l{}", rng.random_range(0..pool)))
            .collect();
        let mut last_recall = 0.0;
        for k in 1..=12 {
            let top: HashSet<&String> = pred.iter().take(k).collect();
            let inter = top.iter().filter(|l| truth.contains(**l)).count();
            let p = precision_at_k(&pred, &truth, k);
            let r = recall_at_k(&pred, &truth, k);
            check(p == inter as f64 / k as f64, || {
                format!("case {case} P@{k}")
            })?;
            check(r == inter as f64 / truth.len() as f64, || {
                format!("case {case} R@{k}")
            })?;
            check(r >= last_recall, || format!("case {case}: R@{k} decreased"))?;
            last_recall = r;
        }
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!(
        "1000 pairs x 12 cutoffs match the set-intersection oracle; recall monotone ({took:.2?})"
    ))
}

// ---------------------------------------------------------------------------

fn word_space(rng: &mut ChaCha8Rng, size: usize, vocab: &[String]) -> LabelSpace {
    let labels = (0..size)
        .map(|i| {
            let len = rng.random_range(1..5);
            let text: Vec<&str> = (0..len)
                .map(|_| vocab.choose(rng).unwrap().as_str())
                .collect();
            Label {
                lid: format!("L{i}"),
                text: text.join(" "),
            }
        })
        .collect();
    LabelSpace::new(labels).unwrap()
}

fn fuzz_text(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    match rng.random_range(0..4) {
        0 => (0..rng.random_range(1..6))
            .map(|_| vocab.choose(rng).unwrap().clone())
            .collect::<Vec<_>>()
            .join(" "),
        1 => (0..rng.random_range(1..20))
            .map(|_| char::from_u32(rng.random_range(0x20..0x2FFF)).unwrap_or('?'))
            .collect(),
        2 => format!("{} ???", vocab.choose(rng).unwrap()),
        _ => "!!! ---".to_string(),
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let vocab: Vec<String> = (0..300).map(|i| format!("t{i}")).collect();
    let space = word_space(&mut rng, 1000, &vocab);
    let index = RetrieverIndex::build(
        &space.texts(),
        RetrieverKind::Bm25,
        Bm25Params::default(),
        None,
    )
    .map_err(|e| e.to_string())?;
    let (k, s) = (10, 10);
    for case in 0..500 {
        let texts: Vec<String> = (0..rng.random_range(0..=k))
            .map(|_| fuzz_text(&mut rng, &vocab))
            .collect();
        let raw = RawGeneration {
            texts,
            prompt_digest: String::new(),
        };
        let (short, rows) =
            map_to_label_space("u", &raw, s, &index, &space).map_err(|e| e.to_string())?;
        check(short.len() <= k * s, || {
            format!("case {case}: {} candidates", short.len())
        })?;
        let union: HashSet<&str> = rows.rows.iter().flatten().map(|n| n.lid.as_str()).collect();
        let listed: HashSet<&str> = short.lids().collect();
        check(union == listed, || {
            format!("case {case}: shortlist differs from row union")
        })?;
        check(listed.len() == short.len(), || {
            format!("case {case}: duplicate candidates")
        })?;
        let mut naive: Vec<&str> = Vec::new();
        for row in &rows.rows {
            for n in row {
                if !naive.contains(&n.lid.as_str()) {
                    naive.push(&n.lid);
                }
            }
        }
        check(naive == short.lids().collect::<Vec<_>>(), || {
            format!("case {case}: order is not row-major")
        })?;
        for e in &short.entries {
            check(rows.rows[e.j][e.r].lid == e.lid, || {
                format!("case {case}: provenance of {}", e.lid)
            })?;
        }
        for row in &rows.rows {
            for w in row.windows(2) {
                let ordered = w[0].score > w[1].score
                    || (w[0].score == w[1].score
                        && space.ordinal(&w[0].lid) < space.ordinal(&w[1].lid));
                check(ordered, || format!("case {case}: row out of order"))?;
            }
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "500 fuzzed generations: bound, union, order and provenance hold ({took:.2?})"
    ))
}

// ---------------------------------------------------------------------------

struct Scripted(Mutex<String>);

impl LlmBackend for Scripted {
    fn complete(&self, _: &LlmRequest) -> Result<LlmResponse, LlmError> {
        Ok(LlmResponse {
            text: self.0.lock().unwrap().clone(),
            usage: Usage::default(),
            cached: false,
            retries: 0,
        })
    }

    fn model_name(&self) -> String {
        "scripted".into()
    }
}

fn adversarial_output(rng: &mut ChaCha8Rng, count: usize) -> String {
    match rng.random_range(0..5) {
        0 => (0..rng.random_range(0..80))
            .map(|_| char::from_u32(rng.random_range(0..0x10FFFF)).unwrap_or('\u{FFFD}'))
            .collect(),
        1 => {
            let items: Vec<String> = (0..rng.random_range(0..30))
                .map(|_| match rng.random_range(0..5) {
                    0 => rng.random_range(-5i64..(count as i64 + 20)).to_string(),
                    1 => format!("\"{}\"", rng.random_range(0..count + 5)),
                    2 => "1".into(),
                    3 => format!("{}.5", rng.random_range(0..count)),
                    _ => "null".into(),
                })
                .collect();
            format!("[{}]", items.join(", "))
        }
        2 => format!(
            "Sure: {} and {}, also {}",
            rng.random_range(0..1000),
            rng.random_range(0..count + 1),
            u64::MAX
        ),
        3 => "[[[[".to_string() + &"9".repeat(rng.random_range(1..40)),
        _ => (1..=count)
            .rev()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let vocab: Vec<String> = (0..200).map(|i| format!("t{i}")).collect();
    let space = word_space(&mut rng, 400, &vocab);
    let backend = Arc::new(Scripted(Mutex::new(String::new())));
    let gateway = Gateway::new(backend.clone());
    let session = PromptSession::new(&gateway, Domain::Product, 1000);
    let x = Instance {
        uid: "u".into(),
        title: "query".into(),
        content: "text".into(),
    };
    for case in 0..10_000 {
        let rows: Vec<Vec<Neighbor>> = (0..rng.random_range(1..=10))
            .map(|_| {
                (0..rng.random_range(1..=10))
                    .map(|_| Neighbor {
                        lid: format!("L{}", rng.random_range(0..400)),
                        score: 0.0,
                    })
                    .collect()
            })
            .collect();
        let matrix = NeighborMatrix { rows };
        let short = union_rows("u", &matrix);
        let raw = adversarial_output(&mut rng, short.len());
        let _ = parse_label_list(&raw, 10);
        let _ = parse_index_list(&raw, short.len(), 10);
        *backend.0.lock().unwrap() = raw;
        let top_k = rng.random_range(1..=12);
        let p =
            rerank_llm(&x, &short, &matrix, top_k, &session, &space).map_err(|e| e.to_string())?;
        let allowed: HashSet<&str> = short.lids().collect();
        let uniq: HashSet<&String> = p.lids.iter().collect();
        check(uniq.len() == p.lids.len(), || {
            format!("case {case}: duplicate prediction")
        })?;
        check(p.lids.iter().all(|l| allowed.contains(l.as_str())), || {
            format!("case {case}: label outside shortlist")
        })?;
        check(p.lids.len() == top_k.min(short.len()), || {
            format!("case {case}: {} predictions", p.lids.len())
        })?;
    }
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "10000 adversarial rerank outputs stayed inside the shortlist, duplicate-free ({took:.2?})"
    ))
}

// ---------------------------------------------------------------------------

/// Round-robin by rescanning each row from the top on every visit.
fn naive_round_robin(rows: &[Vec<String>], k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let depth = rows.iter().map(Vec::len).max().unwrap_or(0);
    for _pass in 0..depth {
        for row in rows {
            if out.len() == k {
                return out;
            }
            if let Some(l) = row.iter().find(|l| !out.contains(l)) {
                out.push(l.clone());
            }
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let to_matrix = |rows: &[Vec<String>]| NeighborMatrix {
        rows: rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|l| Neighbor {
                        lid: l.clone(),
                        score: 0.0,
                    })
                    .collect()
            })
            .collect(),
    };
    let example = vec![
        vec!["A".to_string(), "B".into()],
        vec!["A".to_string(), "C".into()],
    ];
    let got = rerank_heuristic("u", &to_matrix(&example), 4).lids;
    check(got == ["A", "C", "B"], || {
        format!("worked example gave {got:?}")
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let pool = rng.random_range(1..25);
        let rows: Vec<Vec<String>> = (0..rng.random_range(1..=10))
            .map(|_| {
                let mut row: Vec<String> = Vec::new();
                for _ in 0..rng.random_range(0..=10) {
                    let l = format!("L{}", rng.random_range(0..pool));
                    if !row.contains(&l) {
                        row.push(l);
                    }
                }
                row
            })
            .collect();
        let k = rng.random_range(1..=30);
        let got = rerank_heuristic("u", &to_matrix(&rows), k).lids;
        let want = naive_round_robin(&rows, k);
        check(got == want, || format!("case {case}: {got:?} != {want:?}"))?;
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!(
        "worked example [A, C, B] and 1000 random matrices match the naive simulation ({took:.2?})"
    ))
}

// ---------------------------------------------------------------------------

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn genrank(args: &[&str], overrides: &[(&str, String)]) -> Result<std::process::Output, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_genrank"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in overrides {
        cmd.arg(format!("--{k}={v}"));
    }
    let out = cmd.output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "genrank {args:?} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

const STRATEGIES: [&str; 5] = ["content", "label_centric", "retrieval", "free", "hint"];
const RERANKERS: [&str; 3] = ["heuristic", "scorer", "llm"];

fn criterion_6(work: &Path) -> Outcome {
    let start = Instant::now();
    let config = fixture_dir().join("config.json");
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for strategy in STRATEGIES {
        for rerank in RERANKERS {
            let name = format!("{strategy}__{rerank}");
            let out = work.join("golden").join(&name);
            genrank(
                &["run", "--config", config.to_str().unwrap()],
                &[
                    ("output_dir", out.display().to_string()),
                    ("strategy", strategy.into()),
                    ("rerank", rerank.into()),
                    ("backend", r#"{"type":"mock","seed":42}"#.into()),
                ],
            )?;
            let manifest =
                RunManifest::read(&out.join("manifest.json")).map_err(|e| e.to_string())?;
            check(manifest.instances.failed == 0, || {
                format!("{name}: failures")
            })?;
            check(manifest.model == "mock-seed-42", || {
                format!("{name}: backend {}", manifest.model)
            })?;
            let gdir = golden_dir().join(&name);
            for file in ["predictions.jsonl", "report.json"] {
                let produced = read(&out.join(file))?;
                if update {
                    std::fs::create_dir_all(&gdir).map_err(|e| e.to_string())?;
                    std::fs::write(gdir.join(file), &produced).map_err(|e| e.to_string())?;
                }
                let golden = read(&gdir.join(file))?;
                check(produced == golden, || {
                    format!("{name}/{file} differs from golden")
                })?;
            }
        }
    }
    let took = within(Duration::from_secs(60), start)?;
    let verb = if update {
        "regenerated"
    } else {
        "byte-match goldens"
    };
    Ok(format!("15 strategy x rerank runs {verb} ({took:.2?})"))
}

fn criterion_7(work: &Path) -> Outcome {
    let config = fixture_dir().join("config.json");
    let c = config.to_str().unwrap();
    let mut compared = 0;
    for strategy in STRATEGIES {
        for corruption in [None, Some(r#"{"mode":"random_labels","seed":3}"#)] {
            let tag = format!(
                "{strategy}{}",
                if corruption.is_some() { "+corrupt" } else { "" }
            );
            let mut base = vec![
                ("strategy", strategy.to_string()),
                ("rerank", "llm".to_string()),
            ];
            if let Some(cc) = corruption {
                base.push(("corruption", cc.to_string()));
            }
            let single = work.join("replay").join(format!("{tag}-single"));
            let staged = work.join("replay").join(format!("{tag}-staged"));
            let with_dir = |dir: &Path| {
                let mut o = base.clone();
                o.push(("output_dir", dir.display().to_string()));
                o
            };
            genrank(&["run", "--config", c], &with_dir(&single))?;
            for step in ["demo-dump", "shortlist-only", "rerank-only", "eval-only"] {
                genrank(&[step, "--config", c], &with_dir(&staged))?;
            }
            for file in [
                "demos.jsonl",
                "shortlists.jsonl",
                "predictions.jsonl",
                "report.json",
            ] {
                let a = read(&single.join(file))?;
                let b = read(&staged.join(file))?;
                check(a == b, || {
                    format!("{tag}: {file} differs between staged and single-shot")
                })?;
                compared += 1;
            }
        }
    }
    let missing = Command::new(env!("CARGO_BIN_EXE_genrank"))
        .args(["rerank-only", "--config", c])
        .arg(format!(
            "--output_dir={}",
            work.join("replay/empty").display()
        ))
        .env("RUST_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    let stderr = String::from_utf8_lossy(&missing.stderr);
    check(
        missing.status.code() == Some(1) && stderr.contains("shortlists.jsonl"),
        || {
            format!(
                "missing upstream: status {:?}, stderr {stderr}",
                missing.status.code()
            )
        },
    )?;
    Ok(format!(
        "{compared} staged files byte-identical to single-shot runs; missing dump names its file"
    ))
}

// ---------------------------------------------------------------------------

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let letters: Vec<char> = ('a'..='z').collect();
    let vocab: Vec<String> = (0..30_000)
        .map(|_| {
            (0..rng.random_range(3..9))
                .map(|_| *letters.choose(&mut rng).unwrap())
                .collect()
        })
        .collect();
    let pick = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        vocab[((u * u) * vocab.len() as f64) as usize].clone()
    };
    let labels: Vec<String> = (0..131_073)
        .map(|_| {
            (0..rng.random_range(2..9))
                .map(|_| pick(&mut rng))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let queries: Vec<String> = (0..101)
        .map(|_| {
            (0..rng.random_range(3..9))
                .map(|_| pick(&mut rng))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();

    let start = Instant::now();
    let bm25 = RetrieverIndex::build(&labels, RetrieverKind::Bm25, Bm25Params::default(), None)
        .map_err(|e| e.to_string())?;
    let build = within(Duration::from_secs(60), start)?;
    let mut times: Vec<Duration> = queries
        .iter()
        .map(|q| {
            let t = Instant::now();
            let hits = bm25.top_n(q, 10).unwrap();
            assert_eq!(hits.len(), 10);
            t.elapsed()
        })
        .collect();
    times.sort();
    let p50 = times[times.len() / 2];
    check(p50 < Duration::from_millis(20), || {
        format!("bm25 query p50 {p50:?}")
    })?;

    let dense = RetrieverIndex::build(
        &labels,
        RetrieverKind::Dense,
        Bm25Params::default(),
        Some(Arc::new(HashingEmbedder::new(64, 0))),
    )
    .map_err(|e| e.to_string())?;
    let mut worst = Duration::ZERO;
    for q in queries.iter().take(20) {
        let t = Instant::now();
        let hits = dense.top_n(q, 10).map_err(|e| e.to_string())?;
        worst = worst.max(t.elapsed());
        check(hits.len() == 10, || {
            "dense returned fewer than 10 hits".into()
        })?;
    }
    check(worst < Duration::from_millis(200), || {
        format!("dense query took {worst:?}")
    })?;
    Ok(format!(
        "131073 labels: bm25 build {build:.2?}, query p50 {p50:.2?}; dense 64-dim worst query {worst:.2?}"
    ))
}

// ---------------------------------------------------------------------------

/// Minimal OpenAI-compatible endpoint answering with the mock backend and
/// recording every request body.
struct FakeServer {
    url: String,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
}

fn handle(mut stream: TcpStream, bodies: &Mutex<Vec<serde_json::Value>>, mock: &MockBackend) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0;
        let mut authorized = false;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            let lower = line.to_ascii_lowercase();
            if let Some(v) = lower.strip_prefix("content-length:") {
                length = v.trim().parse().unwrap();
            }
            if lower == "authorization: bearer test-key" {
                authorized = true;
            }
        }
        let mut body = vec![0; length];
        reader.read_exact(&mut body).unwrap();
        let (status, reply) = if !authorized {
            ("401 Unauthorized", serde_json::json!({"error": "bad key"}))
        } else {
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let prompt = req["messages"][0]["content"]
                .as_str()
                .unwrap_or_default()
                .to_string();
            bodies.lock().unwrap().push(req);
            let text = mock.respond(&prompt);
            (
                "200 OK",
                serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": text}}],
                    "usage": {"prompt_tokens": 1, "completion_tokens": 1}
                }),
            )
        };
        let payload = reply.to_string();
        let response = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len()
        );
        if stream.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

impl FakeServer {
    fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let shared = bodies.clone();
        std::thread::spawn(move || {
            let mock = MockBackend::new(42);
            for stream in listener.incoming().flatten() {
                let shared = shared.clone();
                std::thread::spawn(move || handle(stream, &shared, &mock));
            }
        });
        Self { url, bodies }
    }
}

fn criterion_9(work: &Path) -> Outcome {
    let server = FakeServer::start();
    let config = fixture_dir().join("config.json");
    let mut lines = Vec::new();
    for (strategy, n) in [("content", 5), ("label_centric", 30)] {
        server.bodies.lock().unwrap().clear();
        let out = work.join("live").join(strategy);
        let backend = serde_json::json!({
            "type": "http", "base_url": server.url, "model": "gpt-3.5-turbo",
            "api_key_env": "GENRANK_ACCEPTANCE_KEY"
        });
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_genrank"));
        cmd.args(["run", "--config", config.to_str().unwrap()])
            .arg(format!("--output_dir={}", out.display()))
            .arg(format!("--strategy={strategy}"))
            .arg(format!("--backend={backend}"))
            .arg("--rerank=llm")
            .env("GENRANK_ACCEPTANCE_KEY", "test-key")
            .env("RUST_LOG", "warn");
        let status = cmd.output().map_err(|e| e.to_string())?;
        check(status.status.success(), || {
            String::from_utf8_lossy(&status.stderr).into_owned()
        })?;

        let m = RunManifest::read(&out.join("manifest.json")).map_err(|e| e.to_string())?;
        let c = &m.config;
        check(
            (c.m, c.n(), c.k, c.s, c.top_k, c.temperature) == (5, n, 10, 10, 10, 0.0),
            || {
                format!(
                    "{strategy}: manifest config {:?}",
                    (c.m, c.n(), c.k, c.s, c.top_k, c.temperature)
                )
            },
        )?;
        check(m.config_digest == c.digest(), || {
            format!("{strategy}: digest does not match recorded config")
        })?;
        let calls = m.calls_by_template;
        let generator = if strategy == "content" {
            calls.t1
        } else {
            calls.t2
        };
        check(
            m.instances.processed == 50 && m.instances.failed == 0,
            || format!("{strategy}: {:?}", m.instances),
        )?;
        check(
            generator == 50 && calls.t3 == 50 && calls.t4 == 50 && calls.t3h == 0,
            || format!("{strategy}: calls {calls:?}"),
        )?;
        check(m.max_calls_per_instance <= 3, || {
            format!("{strategy}: {} calls", m.max_calls_per_instance)
        })?;
        check(m.gateway.calls == 150 && m.model == "gpt-3.5-turbo", || {
            format!("{strategy}: {:?}", m.gateway)
        })?;
        let bodies = server.bodies.lock().unwrap();
        check(bodies.len() == 150, || {
            format!("{strategy}: server saw {} requests", bodies.len())
        })?;
        check(
            bodies
                .iter()
                .all(|b| b["temperature"] == 0.0 && b["model"] == "gpt-3.5-turbo"),
            || format!("{strategy}: request parameters differ from config"),
        )?;
        lines.push(format!(
            "{strategy} n={n}: 150 calls, max {} per instance",
            m.max_calls_per_instance
        ));
    }
    Ok(lines.join("; "))
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("retrieval oracle equivalence", Box::new(criterion_1)),
        ("metric oracle equivalence", Box::new(criterion_2)),
        ("shortlist invariants", Box::new(criterion_3)),
        (
            "subset guarantee under adversarial parsing",
            Box::new(criterion_4),
        ),
        ("heuristic reranker equivalence", Box::new(criterion_5)),
        (
            "deterministic end-to-end golden run",
            Box::new(|| criterion_6(work.path())),
        ),
        (
            "stage-replay equivalence",
            Box::new(|| criterion_7(work.path())),
        ),
        ("scale and latency", Box::new(criterion_8)),
        (
            "configuration fidelity over an OpenAI-compatible endpoint",
            Box::new(|| criterion_9(work.path())),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
