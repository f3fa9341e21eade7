//! `genrank`: batch runner over a JSON config.
//!
//! Any `--dotted.key=value` argument overrides the matching config field;
//! values are read as JSON, falling back to a plain string.
//!
//! Exit status: 0 on success, 1 on invalid input or any other error, 2 when
//! the run finished but too many instances failed.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use genrank::pipeline::{eval_only, Command, Engine, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "genrank",
    version,
    about = "Generate-then-rerank label prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Path to the JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pipeline; resumes from an existing prediction file.
    Run(Common),
    /// Build retrieval indices and save them under the output directory.
    IndexBuild(Common),
    /// Write demonstrations only.
    DemoDump(Common),
    /// Shortlists from a demonstration dump.
    ShortlistOnly(Common),
    /// Predictions from a shortlist dump.
    RerankOnly(Common),
    /// Evaluate a prediction file against the configured ground truth.
    EvalOnly {
        #[command(flatten)]
        common: Common,
        /// Prediction file; defaults to the one in the output directory.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
}

const OWN_FLAGS: &[&str] = &["config", "predictions", "help", "version"];

type Overrides = Vec<(String, String)>;

/// Separates `--a.b=value` / `--a.b value` overrides from clap's arguments.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut plain = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let Some(body) = arg.strip_prefix("--") else {
            plain.push(arg);
            continue;
        };
        match body.split_once('=') {
            Some((key, value)) if !OWN_FLAGS.contains(&key) => {
                overrides.push((key.to_string(), value.to_string()));
            }
            None if body.contains('.') => {
                let value = iter
                    .next()
                    .with_context(|| format!("override --{body} needs a value"))?;
                overrides.push((body.to_string(), value));
            }
            _ => plain.push(arg),
        }
    }
    Ok((plain, overrides))
}

fn load(common: &Common, overrides: &[(String, String)]) -> Result<PipelineConfig> {
    PipelineConfig::load(&common.config, overrides)
        .with_context(|| format!("loading {}", common.config.display()))
}

fn batch(config: PipelineConfig, command: Command) -> Result<ExitCode> {
    let engine = Engine::new(config)?;
    let summary = engine.execute(command)?;
    let m = &summary.manifest;
    log::info!(
        "{}: {} processed, {} resumed, {} failed, {} model calls ({} cached)",
        command.name(),
        m.instances.processed,
        m.instances.resumed,
        m.instances.failed,
        m.gateway.calls,
        m.gateway.cache_hits
    );
    if let Some(report) = &summary.report {
        print!("{}", report.to_json_string());
    }
    if summary.threshold_exceeded {
        log::error!(
            "{} of {} instances failed, above the configured threshold",
            m.instances.failed,
            m.instances.total
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: Cli, overrides: &[(String, String)]) -> Result<ExitCode> {
    match cli.command {
        Cmd::Run(c) => batch(load(&c, overrides)?, Command::Run),
        Cmd::DemoDump(c) => batch(load(&c, overrides)?, Command::DemoDump),
        Cmd::ShortlistOnly(c) => batch(load(&c, overrides)?, Command::ShortlistOnly),
        Cmd::RerankOnly(c) => batch(load(&c, overrides)?, Command::RerankOnly),
        Cmd::IndexBuild(c) => {
            let engine = Engine::new(load(&c, overrides)?)?;
            for path in engine.save_indices()? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::EvalOnly {
            common,
            predictions,
        } => {
            let config = load(&common, overrides)?;
            let report = eval_only(&config, predictions.as_deref())?;
            print!("{}", report.to_json_string());
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// The error and its causes, skipping causes already spelled out by the
/// message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out = format!("{out}: {text}");
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(split) => split,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli, &overrides) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
