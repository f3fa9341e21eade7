//! Batch orchestration: datasets and indices are loaded once, then a pool
//! of workers takes instances through demonstrations, shortlisting and
//! reranking while a single writer appends their records.
//!
//! Output files are rewritten in test-file order at the end of every
//! command, and resumption is driven only by which uids already have a
//! line in the command's output file, so interrupted and uninterrupted runs
//! end with identical files.

pub mod config;
pub mod files;
pub mod manifest;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{
    load_ground_truth, load_instances, load_label_space, GroundTruth, Instance, LabelSpace,
};
use crate::demogen::{
    corrupt, generate_content_based, generate_label_centric, retrieve_demonstrations, DemoRecord,
    DemoStrategy, DemonstrationSet,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, load_predictions, EvalReport};
use crate::llm::{
    CallCounts, Gateway, HttpBackend, HttpConfig, LlmBackend, MockBackend, PromptSession,
    ResponseCache,
};
use crate::rerank::{
    rerank_heuristic, rerank_llm, rerank_scorer, PredictionRecord, RankedPrediction,
    RelevanceScorer, RerankStrategy, TokenOverlapScorer,
};
use crate::retrieval::tokenize::truncate_whitespace_tokens;
use crate::retrieval::{
    load_index, save_index, Bm25Params, Embedder, HashingEmbedder, HttpEmbedder, RetrieverIndex,
    RetrieverKind,
};
use crate::shortlist::{
    hint_generation, infer_raw_labels, map_to_label_space, retriever_shortlist, NeighborMatrix,
    RawGeneration, Shortlist, ShortlistRecord,
};

pub use config::{PipelineConfig, QueryText, Strategy};
use files::*;
pub use manifest::RunManifest;

/// Which part of the pipeline a command covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    DemoDump,
    ShortlistOnly,
    RerankOnly,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::DemoDump => "demo-dump",
            Command::ShortlistOnly => "shortlist-only",
            Command::RerankOnly => "rerank-only",
        }
    }

    fn manifest_file(self) -> String {
        match self {
            Command::Run => MANIFEST_FILE.to_string(),
            other => format!("manifest.{}.json", other.name()),
        }
    }

    /// The file whose lines mark an instance as done for this command.
    fn output_file(self) -> &'static str {
        match self {
            Command::Run | Command::RerankOnly => PREDICTIONS_FILE,
            Command::DemoDump => DEMOS_FILE,
            Command::ShortlistOnly => SHORTLISTS_FILE,
        }
    }
}

/// The loaded inputs of a run.
pub struct Dataset {
    pub space: LabelSpace,
    pub tests: Vec<Instance>,
    pub train: Vec<Instance>,
    pub truth: Option<GroundTruth>,
}

impl Dataset {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let d = &config.dataset;
        let space = load_label_space(&d.labels)?;
        let tests = load_instances(&d.test)?;
        let train = match &d.train {
            Some(p) => load_instances(p)?,
            None => Vec::new(),
        };
        let truth = match &d.truth {
            Some(p) => Some(load_ground_truth(p, &space)?),
            None => None,
        };
        Ok(Self {
            space,
            tests,
            train,
            truth,
        })
    }
}

fn query_text(policy: QueryText, x: &Instance, max_tokens: usize) -> String {
    match policy {
        QueryText::Title => x.title.clone(),
        QueryText::TitleContent => {
            let content = truncate_whitespace_tokens(&x.content, max_tokens);
            format!("{} {}", x.title, content)
        }
    }
}

fn embedder_for(config: &PipelineConfig) -> Result<Option<Arc<dyn Embedder>>> {
    if config.retriever.kind != RetrieverKind::Dense {
        return Ok(None);
    }
    let e: Arc<dyn Embedder> = match &config.retriever.embedder {
        config::EmbedderConfig::Hashing { dim, seed } => {
            Arc::new(HashingEmbedder::new(*dim, *seed))
        }
        config::EmbedderConfig::Http {
            base_url,
            model,
            dim,
            api_key_env,
        } => Arc::new(HttpEmbedder::new(
            base_url.clone(),
            model.clone(),
            read_credential(api_key_env.as_deref())?,
            *dim,
        )?),
    };
    Ok(Some(e))
}

fn read_credential(var: Option<&str>) -> Result<Option<String>> {
    match var {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| Error::Config(format!("credential variable `{var}` is not set"))),
    }
}

/// Builds the configured backend.
pub fn backend_for(config: &PipelineConfig) -> Result<Arc<dyn LlmBackend>> {
    Ok(match &config.backend {
        config::BackendConfig::Mock { seed } => Arc::new(MockBackend::new(*seed)),
        config::BackendConfig::Http {
            base_url,
            model,
            api_key_env,
            timeout_secs,
            max_retries,
        } => {
            let mut http = HttpConfig::new(base_url.clone(), model.clone());
            http.api_key = read_credential(api_key_env.as_deref())?;
            http.timeout = Duration::from_secs(*timeout_secs);
            http.max_retries = *max_retries;
            Arc::new(HttpBackend::new(http)?)
        }
    })
}

fn index_dir(config: &PipelineConfig) -> PathBuf {
    config.output_dir.join("index")
}

fn index_path(config: &PipelineConfig, collection: &str) -> PathBuf {
    index_dir(config).join(format!("{collection}.{}.grix", config.retriever.kind))
}

/// Loads a persisted index when one matching `docs` and the configured
/// parameters exists, otherwise builds it.
fn obtain_index(
    config: &PipelineConfig,
    collection: &str,
    docs: &[String],
) -> Result<RetrieverIndex> {
    let kind = config.retriever.kind;
    let params = Bm25Params {
        k1: config.retriever.k1,
        b: config.retriever.b,
    };
    let embedder = embedder_for(config)?;
    let path = index_path(config, collection);
    if path.exists() {
        let digest = crate::retrieval::docs_digest(docs);
        match load_index(&path, embedder.clone(), Some(digest)) {
            Ok(index)
                if index.kind() == kind && index.as_bm25().is_none_or(|b| b.params() == params) =>
            {
                return Ok(index)
            }
            Ok(_) => log::warn!(
                "{}: parameters differ from config; rebuilding",
                path.display()
            ),
            Err(e) => log::warn!("{}: {e}; rebuilding", path.display()),
        }
    }
    RetrieverIndex::build(docs, kind, params, embedder)
}

/// Everything shared read-only by the workers.
pub struct Engine {
    pub config: PipelineConfig,
    pub data: Dataset,
    pub label_index: RetrieverIndex,
    pub train_index: Option<RetrieverIndex>,
    pub gateway: Gateway,
    pub scorer: Box<dyn RelevanceScorer>,
    order: HashMap<String, usize>,
    load_ms: u64,
    index_ms: u64,
}

/// Per-instance results headed for the writer.
#[derive(Default)]
struct Produced {
    demos: Option<String>,
    shortlist: Option<String>,
    prediction: Option<String>,
    empty_demonstrations: bool,
    retriever_fallback: bool,
    rerank_fallback: bool,
    padded: bool,
}

struct Outcome {
    ordinal: usize,
    result: std::result::Result<Produced, (&'static str, Error)>,
    calls: CallCounts,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    uid: &'a str,
    stage: &'a str,
    error: String,
}

#[derive(Default)]
struct StageClock {
    demos: AtomicU64,
    shortlist: AtomicU64,
    rerank: AtomicU64,
}

impl StageClock {
    fn time<T>(slot: &AtomicU64, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        slot.fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        out
    }
}

fn ms(nanos: u64) -> u64 {
    nanos / 1_000_000
}

/// Result of a batch command.
#[derive(Debug)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub report: Option<EvalReport>,
    /// Failed fraction of all test instances exceeded the threshold.
    pub threshold_exceeded: bool,
}

impl Engine {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let backend = backend_for(&config)?;
        Self::with_backend(config, backend)
    }

    /// Like [`new`](Self::new) with an explicit backend in place of the
    /// configured one.
    pub fn with_backend(config: PipelineConfig, backend: Arc<dyn LlmBackend>) -> Result<Self> {
        config.validate()?;
        let start = Instant::now();
        let data = Dataset::load(&config)?;
        let load_ms = start.elapsed().as_millis() as u64;
        let start = Instant::now();
        let label_docs: Vec<String> = data.space.labels().iter().map(|l| l.text.clone()).collect();
        let label_index = obtain_index(&config, "labels", &label_docs)?;
        let train_index = if config.strategy == Strategy::Retrieval {
            if data.train.is_empty() {
                return Err(Error::EmptyCollection);
            }
            let docs: Vec<String> = data
                .train
                .iter()
                .map(|x| query_text(config.retriever.query_text, x, config.content_max_tokens))
                .collect();
            Some(obtain_index(&config, "train", &docs)?)
        } else {
            None
        };
        let index_ms = start.elapsed().as_millis() as u64;
        let mut gateway = Gateway::new(backend)
            .with_temperature(config.temperature)
            .with_max_output_tokens(config.max_output_tokens);
        if let Some(dir) = &config.cache_dir {
            gateway = gateway.with_cache(ResponseCache::open(dir)?);
        }
        if let Some(rate) = config.requests_per_second {
            gateway = gateway.with_rate_limit(rate);
        }
        let mut order = HashMap::with_capacity(data.tests.len());
        for (i, x) in data.tests.iter().enumerate() {
            if order.insert(x.uid.clone(), i).is_some() {
                return Err(Error::DuplicateId(x.uid.clone()));
            }
        }
        Ok(Self {
            config,
            data,
            label_index,
            train_index,
            gateway,
            scorer: Box::new(TokenOverlapScorer),
            order,
            load_ms,
            index_ms,
        })
    }

    pub fn session(&self) -> PromptSession<'_> {
        PromptSession::new(
            &self.gateway,
            self.config.dataset.domain,
            self.config.content_max_tokens,
        )
    }

    fn query_of(&self, x: &Instance) -> String {
        query_text(
            self.config.retriever.query_text,
            x,
            self.config.content_max_tokens,
        )
    }

    fn corruption_seed(&self, base: u64, uid: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(base.to_le_bytes());
        h.update(uid.as_bytes());
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }

    /// Demonstrations for `x` under the configured strategy, corrupted when
    /// an ablation is configured.
    pub fn demonstrations(
        &self,
        x: &Instance,
        session: &PromptSession<'_>,
    ) -> Result<DemonstrationSet> {
        let c = &self.config;
        let space = &self.data.space;
        let set = match c.strategy {
            Strategy::Content => {
                generate_content_based(x, c.m, c.n(), session, &self.label_index, space)?
            }
            Strategy::LabelCentric => generate_label_centric(
                x,
                &self.query_of(x),
                c.n(),
                session,
                &self.label_index,
                space,
            )?,
            Strategy::Retrieval => retrieve_demonstrations(
                &self.query_of(x),
                c.m,
                c.n(),
                self.train_index.as_ref().ok_or(Error::EmptyCollection)?,
                &self.data.train,
                &self.label_index,
                space,
            )?,
            Strategy::Free | Strategy::Hint | Strategy::Retriever => {
                DemonstrationSet::empty(DemoStrategy::None)
            }
        };
        Ok(match (&c.corruption, set.is_empty()) {
            (Some(cc), false) => {
                corrupt(&set, cc.mode, self.corruption_seed(cc.seed, &x.uid), space)
            }
            _ => set,
        })
    }

    /// Raw generation, shortlist and neighbor rows for `x`; the flag is set
    /// when the retriever's shortlist replaced an empty generated one.
    pub fn shortlist(
        &self,
        x: &Instance,
        demos: &DemonstrationSet,
        session: &PromptSession<'_>,
    ) -> Result<(RawGeneration, Shortlist, NeighborMatrix, bool)> {
        let c = &self.config;
        let space = &self.data.space;
        let raw = match c.strategy {
            Strategy::Retriever => {
                let (s, m) = retriever_shortlist(
                    &x.uid,
                    &self.query_of(x),
                    c.budget,
                    &self.label_index,
                    space,
                )?;
                return Ok((RawGeneration::default(), s, m, false));
            }
            Strategy::Hint => {
                let (hints, _) = retriever_shortlist(
                    &x.uid,
                    &self.query_of(x),
                    c.budget,
                    &self.label_index,
                    space,
                )?;
                if hints.is_empty() {
                    RawGeneration::default()
                } else {
                    hint_generation(x, &hints, c.k, session, space)?
                }
            }
            _ => infer_raw_labels(x, demos, c.k, session, space)?,
        };
        let (short, rows) = map_to_label_space(&x.uid, &raw, c.s, &self.label_index, space)?;
        if !short.is_empty() {
            return Ok((raw, short, rows, false));
        }
        log::warn!(
            "{}: generation mapped to no labels; using retriever shortlist",
            x.uid
        );
        let (short, rows) = retriever_shortlist(
            &x.uid,
            &self.query_of(x),
            c.k * c.s,
            &self.label_index,
            space,
        )?;
        Ok((raw, short, rows, true))
    }

    pub fn rerank(
        &self,
        x: &Instance,
        shortlist: &Shortlist,
        rows: &NeighborMatrix,
        session: &PromptSession<'_>,
    ) -> Result<RankedPrediction> {
        let k = self.config.top_k;
        Ok(match self.config.rerank {
            RerankStrategy::Heuristic => rerank_heuristic(&x.uid, rows, k),
            RerankStrategy::Scorer => rerank_scorer(
                &self.query_of(x),
                shortlist,
                k,
                self.scorer.as_ref(),
                &self.data.space,
            ),
            RerankStrategy::Llm => rerank_llm(x, shortlist, rows, k, session, &self.data.space)?,
        })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.out(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(Error::MissingUpstream(p))
        }
    }

    /// Refuses to mix results of differently configured runs in one
    /// output directory.
    fn claim_output_dir(&self) -> Result<()> {
        let dir = &self.config.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let state = dir.join(STATE_FILE);
        let digest = self.config.digest();
        match std::fs::read_to_string(&state) {
            Ok(existing) if existing.trim() == digest => Ok(()),
            Ok(_) => Err(Error::Config(format!(
                "{} holds results of a different configuration",
                dir.display()
            ))),
            Err(_) => write_atomic(&state, format!("{digest}\n").as_bytes()),
        }
    }

    fn read_upstream<T: serde::de::DeserializeOwned>(
        &self,
        name: &str,
    ) -> Result<HashMap<String, T>> {
        let path = self.require(name)?;
        let mut out = HashMap::new();
        for (i, (uid, line)) in read_uid_lines(&path)?.into_iter().enumerate() {
            let record: T = serde_json::from_str(&line).map_err(|e| Error::Record {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.entry(uid).or_insert(record);
        }
        Ok(out)
    }

    /// Runs `command` over every test instance not yet done.
    pub fn execute(&self, command: Command) -> Result<RunSummary> {
        let total_start = Instant::now();
        self.claim_output_dir()?;
        let mut manifest = RunManifest::new(command.name(), &self.config, self.gateway_model())?;
        let done = completed_uids(&self.out(command.output_file()))?;

        let demos_in: HashMap<String, DemoRecord> = match command {
            Command::ShortlistOnly => self.read_upstream(DEMOS_FILE)?,
            _ => HashMap::new(),
        };
        let shortlists_in: HashMap<String, ShortlistRecord> = match command {
            Command::RerankOnly => self.read_upstream(SHORTLISTS_FILE)?,
            _ => HashMap::new(),
        };
        let todo: Vec<usize> = self
            .data
            .tests
            .iter()
            .enumerate()
            .filter(|(_, x)| !done.contains(&x.uid))
            .filter(|(_, x)| match command {
                Command::ShortlistOnly => demos_in.contains_key(&x.uid),
                Command::RerankOnly => shortlists_in.contains_key(&x.uid),
                _ => true,
            })
            .map(|(i, _)| i)
            .collect();
        manifest.instances.total = self.data.tests.len();
        manifest.instances.resumed = done.len();

        let writes_demos = matches!(command, Command::Run | Command::DemoDump);
        let writes_shortlists = matches!(command, Command::Run | Command::ShortlistOnly);
        let writes_predictions = matches!(command, Command::Run | Command::RerankOnly);
        let open = |name: &str, wanted: bool| -> Result<Option<LineAppender>> {
            wanted
                .then(|| LineAppender::open(self.out(name), false))
                .transpose()
        };
        let mut demos_out = open(DEMOS_FILE, writes_demos)?;
        let mut shortlists_out = open(SHORTLISTS_FILE, writes_shortlists)?;
        let mut predictions_out = open(PREDICTIONS_FILE, writes_predictions)?;
        let mut failures_out = LineAppender::open(self.out(FAILURES_FILE), true)?;

        let clock = StageClock::default();
        let work = |ordinal: usize,
                    session: &PromptSession<'_>|
         -> std::result::Result<Produced, (&'static str, Error)> {
            let x = &self.data.tests[ordinal];
            let mut p = Produced::default();
            let demos = match command {
                Command::Run | Command::DemoDump => {
                    let set = StageClock::time(&clock.demos, || self.demonstrations(x, session))
                        .map_err(|e| ("demonstrations", e))?;
                    p.empty_demonstrations = set.degraded;
                    p.demos = Some(to_line(&DemoRecord::from_set(&x.uid, &set)));
                    Some(set)
                }
                Command::ShortlistOnly => Some(
                    demos_in[&x.uid]
                        .to_set(&self.data.space)
                        .map_err(|e| ("demonstrations", e))?,
                ),
                Command::RerankOnly => None,
            };
            if command == Command::DemoDump {
                return Ok(p);
            }
            let (short, rows) = match demos {
                Some(set) => {
                    let (raw, short, rows, fallback) =
                        StageClock::time(&clock.shortlist, || self.shortlist(x, &set, session))
                            .map_err(|e| ("shortlist", e))?;
                    p.retriever_fallback = fallback;
                    p.shortlist = Some(to_line(&ShortlistRecord::new(
                        &short, &rows, &raw.texts, fallback,
                    )));
                    (short, rows)
                }
                None => shortlists_in[&x.uid]
                    .clone()
                    .into_parts(&self.data.space)
                    .map_err(|e| ("shortlist", e))?,
            };
            if command == Command::ShortlistOnly {
                return Ok(p);
            }
            let prediction =
                StageClock::time(&clock.rerank, || self.rerank(x, &short, &rows, session))
                    .map_err(|e| ("rerank", e))?;
            p.rerank_fallback = prediction.fallback;
            p.padded = prediction.padded > 0;
            p.prediction = Some(to_line(&PredictionRecord::from(&prediction)));
            Ok(p)
        };

        let next = AtomicUsize::new(0);
        let (tx, rx) = mpsc::channel::<Outcome>();
        let workers = self.config.concurrency.min(todo.len()).max(1);
        let mut write_error: Option<Error> = None;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (todo, next, work) = (&todo, &next, &work);
                scope.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&ordinal) = todo.get(i) else { break };
                    let session = self.session();
                    let result = work(ordinal, &session);
                    let outcome = Outcome {
                        ordinal,
                        result,
                        calls: session.calls(),
                    };
                    if tx.send(outcome).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for outcome in rx {
                let uid = &self.data.tests[outcome.ordinal].uid;
                manifest.calls_by_template.add(&outcome.calls);
                manifest.max_calls_per_instance =
                    manifest.max_calls_per_instance.max(outcome.calls.total());
                let written = match outcome.result {
                    Ok(p) => {
                        manifest.instances.processed += 1;
                        let f = &mut manifest.fallbacks;
                        f.empty_demonstrations += p.empty_demonstrations as usize;
                        f.retriever_shortlist += p.retriever_fallback as usize;
                        f.rerank_heuristic += p.rerank_fallback as usize;
                        f.padded_predictions += p.padded as usize;
                        let mut res = Ok(());
                        for (out, line) in [
                            (&mut demos_out, p.demos),
                            (&mut shortlists_out, p.shortlist),
                            (&mut predictions_out, p.prediction),
                        ] {
                            if let (Some(out), Some(line), Ok(())) = (out.as_mut(), line, &res) {
                                res = out.append(&line);
                            }
                        }
                        res
                    }
                    Err((stage, error)) => {
                        manifest.instances.processed += 1;
                        manifest.instances.failed += 1;
                        log::error!("{uid}: {stage} failed: {error}");
                        failures_out.append(&to_line(&FailureRecord {
                            uid,
                            stage,
                            error: error.to_string(),
                        }))
                    }
                };
                if let Err(e) = written {
                    // Stop handing out work; finished lines stay on disk.
                    next.store(usize::MAX / 2, Ordering::Relaxed);
                    write_error.get_or_insert(e);
                }
            }
        });
        if let Some(e) = write_error {
            return Err(e);
        }
        drop((demos_out, shortlists_out, predictions_out, failures_out));

        let order: HashMap<&str, usize> =
            self.order.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        for (name, wanted) in [
            (DEMOS_FILE, writes_demos),
            (SHORTLISTS_FILE, writes_shortlists),
            (PREDICTIONS_FILE, writes_predictions),
            (FAILURES_FILE, true),
        ] {
            if wanted {
                canonicalize(&self.out(name), &order)?;
            }
        }

        let mut report = None;
        if writes_predictions && self.data.truth.is_some() {
            let start = Instant::now();
            report = Some(self.evaluate_predictions()?);
            manifest.timing.evaluate_ms = start.elapsed().as_millis() as u64;
        }

        manifest.gateway = self.gateway.snapshot();
        manifest.timing.load_ms = self.load_ms;
        manifest.timing.index_ms = self.index_ms;
        manifest.timing.demonstrations_ms = ms(clock.demos.load(Ordering::Relaxed));
        manifest.timing.shortlist_ms = ms(clock.shortlist.load(Ordering::Relaxed));
        manifest.timing.rerank_ms = ms(clock.rerank.load(Ordering::Relaxed));
        manifest.timing.total_ms = total_start.elapsed().as_millis() as u64;
        manifest.write(&self.out(&command.manifest_file()))?;

        let total = self.data.tests.len().max(1) as f64;
        let threshold_exceeded =
            manifest.instances.failed as f64 / total > self.config.failure_threshold;
        Ok(RunSummary {
            manifest,
            report,
            threshold_exceeded,
        })
    }

    fn gateway_model(&self) -> String {
        self.gateway.request("").model_name
    }

    fn evaluate_predictions(&self) -> Result<EvalReport> {
        let truth = self.data.truth.as_ref().expect("checked by caller");
        let predictions = load_predictions(self.out(PREDICTIONS_FILE))?;
        let report = evaluate(&predictions, truth, &self.config.eval_ks)?;
        write_atomic(&self.out(REPORT_FILE), report.to_json_string().as_bytes())?;
        Ok(report)
    }

    /// Builds the configured indices and saves them under the output
    /// directory, where later commands pick them up.
    pub fn save_indices(&self) -> Result<Vec<PathBuf>> {
        let dir = index_dir(&self.config);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut written = Vec::new();
        let label_path = index_path(&self.config, "labels");
        save_index(&self.label_index, &label_path)?;
        written.push(label_path);
        if let Some(train) = &self.train_index {
            let p = index_path(&self.config, "train");
            save_index(train, &p)?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Evaluates `predictions` (default: the output directory's prediction
/// file) against the configured ground truth and writes the report next to
/// the config's outputs.
pub fn eval_only(config: &PipelineConfig, predictions: Option<&Path>) -> Result<EvalReport> {
    let truth_path = config
        .dataset
        .truth
        .as_ref()
        .ok_or_else(|| Error::Config("evaluation needs `dataset.truth`".into()))?;
    let space = load_label_space(&config.dataset.labels)?;
    let truth = load_ground_truth(truth_path, &space)?;
    let default_path = config.output_dir.join(PREDICTIONS_FILE);
    let path = predictions.unwrap_or(&default_path);
    if !path.exists() {
        return Err(Error::MissingUpstream(path.to_path_buf()));
    }
    let records = load_predictions(path)?;
    for r in &records {
        for lid in &r.lids {
            if !space.contains(lid) {
                return Err(Error::UnknownLabel {
                    uid: r.uid.clone(),
                    lid: lid.clone(),
                });
            }
        }
    }
    let report = evaluate(&records, &truth, &config.eval_ks)?;
    std::fs::create_dir_all(&config.output_dir).map_err(|e| Error::io(&config.output_dir, e))?;
    write_atomic(
        &config.output_dir.join(REPORT_FILE),
        report.to_json_string().as_bytes(),
    )?;
    Ok(report)
}
