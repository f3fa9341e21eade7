use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/config.json")
}

fn genrank(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genrank"))
        .args(args)
        .arg("--config")
        .arg(config())
        .arg(format!("--output_dir={}", out.display()))
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn resumed_run_reproduces_the_uninterrupted_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(genrank(&["run", "--strategy=label_centric"], &out)
        .status
        .success());
    let full = std::fs::read_to_string(out.join("predictions.jsonl")).unwrap();
    let half: String = full.lines().take(20).map(|l| format!("{l}\n")).collect();
    // A torn trailing line, as left by a crash mid-write.
    std::fs::write(out.join("predictions.jsonl"), half + "{\"uid\":\"T0").unwrap();
    let again = genrank(&["run", "--strategy=label_centric"], &out);
    assert!(
        again.status.success(),
        "{}",
        String::from_utf8_lossy(&again.stderr)
    );
    assert_eq!(
        std::fs::read_to_string(out.join("predictions.jsonl")).unwrap(),
        full
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["instances"]["resumed"], 20);
    assert_eq!(manifest["instances"]["processed"], 30);
}

#[test]
fn changed_config_on_same_output_dir_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert!(genrank(&["run", "--rerank=heuristic"], &out)
        .status
        .success());
    let clash = genrank(&["run", "--rerank=heuristic", "--k=5"], &out);
    assert_eq!(clash.status.code(), Some(1));
    // Operational settings do not count as a different run.
    assert!(
        genrank(&["run", "--rerank=heuristic", "--concurrency=1"], &out)
            .status
            .success()
    );
}

#[test]
fn invalid_configuration_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = genrank(&["run", "--top_k=0"], &dir.path().join("a"));
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("top_k"));
    let unknown = genrank(&["run", "--strategy=psychic"], &dir.path().join("b"));
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn failure_rate_above_threshold_exits_with_two() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let backend = format!(
        r#"{{"type":"http","base_url":"http://127.0.0.1:{port}/v1","model":"m","max_retries":0}}"#
    );
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("down");
    let result = genrank(&["run", &format!("--backend={backend}")], &out);
    assert_eq!(
        result.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let failures = std::fs::read_to_string(out.join("failures.jsonl")).unwrap();
    assert_eq!(failures.lines().count(), 50);
    let first: serde_json::Value = serde_json::from_str(failures.lines().next().unwrap()).unwrap();
    assert!(first["stage"].is_string() && first["error"].is_string());
}

#[test]
fn index_build_then_run_reuses_saved_indices() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("idx");
    assert!(genrank(&["index-build"], &out).status.success());
    let saved: Vec<_> = std::fs::read_dir(out.join("index"))
        .unwrap()
        .flatten()
        .collect();
    assert!(!saved.is_empty());
    let run = genrank(&["run", "--rerank=heuristic"], &out);
    assert!(run.status.success());
    let report: serde_json::Value = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(report["n_evaluated"], 50);
}

#[test]
fn ground_truth_and_thread_count_do_not_change_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        genrank(&["run", "--strategy=content", "--concurrency=1"], &a)
            .status
            .success()
    );
    let blind = genrank(
        &[
            "run",
            "--strategy=content",
            "--concurrency=8",
            "--dataset.truth=null",
        ],
        &b,
    );
    assert!(
        blind.status.success(),
        "{}",
        String::from_utf8_lossy(&blind.stderr)
    );
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "predictions.jsonl"), read(&b, "predictions.jsonl"));
    assert_eq!(read(&a, "shortlists.jsonl"), read(&b, "shortlists.jsonl"));
    assert!(!b.join("report.json").exists());
}

#[test]
fn model_calls_per_instance_stay_within_strategy_bounds() {
    let dir = tempfile::tempdir().unwrap();
    for (strategy, bound) in [
        ("content", 3),
        ("label_centric", 3),
        ("retrieval", 2),
        ("free", 2),
        ("hint", 2),
    ] {
        let out = dir.path().join(strategy);
        assert!(genrank(&["run", &format!("--strategy={strategy}")], &out)
            .status
            .success());
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
                .unwrap();
        let max = manifest["max_calls_per_instance"].as_u64().unwrap();
        assert!(max <= bound && max >= 2, "{strategy}: {max}");
    }
}
