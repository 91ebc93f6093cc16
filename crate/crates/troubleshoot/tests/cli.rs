use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_troubleshoot"));
    for (k, _) in std::env::vars() {
        if k.starts_with("TROUBLESHOOT_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn synth(dir: &Path, seed: &str) -> String {
    let path = dir.to_str().unwrap().to_string();
    json_ok(&["--seed", seed, "gen-synthetic", "--tickets", "60", "--faults", "20", "--out", &path]);
    path
}

#[test]
fn synthetic_corpus_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"), "3");
    let b = synth(&tmp.path().join("b"), "3");
    let c = synth(&tmp.path().join("c"), "4");
    for f in ["tickets.jsonl", "faults.jsonl"] {
        let read = |d: &str| std::fs::read(Path::new(d).join(f)).unwrap();
        assert_eq!(read(&a), read(&b), "{f}");
        assert_ne!(read(&a), read(&c), "{f}");
    }
}

#[test]
fn evaluate_retrieval_reports_recall_at_standard_cutoffs() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "5");
    let report = json_ok(&[
        "evaluate", "--corpus", &corpus, "--task", "retrieval", "--format", "json", "--max-queries", "20",
    ]);
    assert_eq!(report["task"], "retrieval");
    let metrics = report["metrics"].as_object().unwrap();
    let mut last = 0.0;
    for k in [1, 10, 50, 100] {
        let r = metrics[&format!("recall@{k}")].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&r) && r >= last, "recall@{k} = {r}");
        last = r;
    }
}

#[test]
fn curate_with_unreachable_threshold_keeps_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(&tmp.path().join("in"), "6");
    let out = tmp.path().join("out");
    let summary = json_ok(&["curate", "--corpus", &corpus, "--threshold", "1e9", "--out", out.to_str().unwrap()]);
    assert_eq!(summary["kept"], 0);
    assert_eq!(summary["dropped"], 20);
    assert_eq!(std::fs::read_to_string(out.join("faults.jsonl")).unwrap().trim(), "");
}

#[test]
fn retrieve_route_and_pairs_produce_json() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "8");
    let first: Value = serde_json::from_str(
        std::fs::read_to_string(Path::new(&corpus).join("tickets.jsonl")).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    let id = first["id"].as_str().unwrap();
    let hits = json_ok(&["retrieve", "--corpus", &corpus, "--ticket-id", id, "--k", "4"]);
    assert_eq!(hits["items"].as_array().unwrap().len(), 4);
    let routed = json_ok(&["route", "--corpus", &corpus, "--ticket-id", id]);
    assert!(routed["top1"].is_string(), "{routed}");
    assert_eq!(routed["method"], "retrieval");
    let pairs_out = tmp.path().join("pairs.jsonl");
    let counts = json_ok(&["pairs", "--corpus", &corpus, "--out", pairs_out.to_str().unwrap()]);
    let lines = std::fs::read_to_string(&pairs_out).unwrap().lines().count();
    assert_eq!(counts["total"].as_u64().unwrap() as usize, lines);
}

#[test]
fn validation_errors_exit_with_2_and_runtime_errors_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), "9");

    let out = run(&["analyze", "--corpus", &corpus, "--ticket-id", "T000001", "--grid", "0.1:0"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["retrieve", "--corpus", &corpus, "--ticket-id", "NO-SUCH-TICKET"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    let out = bin()
        .args(["retrieve", "--corpus", &corpus, "--ticket-id", "T000001"])
        .env("TROUBLESHOOT_NOT_A_KEY", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("missing");
    let out = run(&["pairs", "--corpus", missing.to_str().unwrap(), "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
