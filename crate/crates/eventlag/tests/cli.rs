use std::path::Path;
use std::process::Command;

fn eventlag(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_eventlag")).args(args).output().unwrap()
}

fn error_record(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("error.json")).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(eventlag(&[]).status.code(), Some(1));
    assert_eq!(eventlag(&["pipeline", "--synthetic"]).status.code(), Some(1));
    assert_eq!(eventlag(&["--help"]).status.code(), Some(0));
}

#[test]
fn step_by_step_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).to_string_lossy().into_owned();
    let ok = |args: &[&str]| {
        let out = eventlag(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    ok(&["synth", "--seed", "3", "--out", &d("data")]);
    ok(&["detect", "--tweets", &d("data/tweets.csv"), "--transactions", &d("data/transactions.csv"), "--out", &d("det")]);
    ok(&["cluster", "--events", &d("det/events/signal.jsonl"), "--k", "3", "--out", &d("clu")]);
    ok(&[
        "analyze",
        "--signal-events",
        &d("clu/events/signal.jsonl"),
        "--target-events",
        &d("det/events/target.jsonl"),
        "--seed",
        "3",
        "--runs",
        "50",
        "--out",
        &d("sig"),
    ]);
    for f in ["sig/significance.json", "sig/tables/success.md", "sig/curves/cluster-3.csv", "clu/model.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("sig/quarantine").exists());
}

#[test]
fn bad_input_writes_error_record() {
    let dir = tempfile::tempdir().unwrap();
    let tweets = dir.path().join("tweets.csv");
    std::fs::write(&tweets, "date,brand_id,pos,neg,volume\n2014-01-01,a,5,5,3\n").unwrap();
    let tx = dir.path().join("transactions.csv");
    std::fs::write(&tx, "timestamp,brand_id,value\n2014-01-01T10:00:00,a,10\n").unwrap();
    let out = dir.path().join("out");
    let o = eventlag(&[
        "pipeline",
        "--tweets",
        tweets.to_str().unwrap(),
        "--transactions",
        tx.to_str().unwrap(),
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["stage"], "ingest");
    assert_eq!(rec["exit_code"], 2);
    assert!(!out.join("significance.json").exists());
}

#[test]
fn invalid_runs_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = eventlag(&["pipeline", "--synthetic", "--seed", "1", "--runs", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&out)["exit_code"], 1);
}

#[test]
fn unreadable_events_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("nope.jsonl");
    let o = eventlag(&["cluster", "--events", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_record(&out)["stage"], "cluster");
}
