use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agent-trust"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is one JSON document")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Generates a 10-agent instance with two newcomers into `dir`.
fn instance(dir: &Path) -> (PathBuf, PathBuf) {
    let log = dir.join("log.jsonl");
    let profiles = dir.join("profiles.jsonl");
    json(&run(&[
        "generate",
        "--seed",
        "42",
        "--agents",
        "10",
        "--interactions",
        "80",
        "--newcomer-fraction",
        "0.2",
        "--out",
        p(&log),
        "--profiles-out",
        p(&profiles),
    ]));
    (log, profiles)
}

#[test]
fn generate_is_deterministic() {
    let a = run(&["generate", "--seed", "42"]);
    let b = run(&["generate", "--seed", "42"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, run(&["generate", "--seed", "43"]).stdout);
    let lines = String::from_utf8(a.stdout).unwrap();
    assert_eq!(lines.lines().count(), 200);
}

#[test]
fn newcomer_gets_mean_reputation() {
    let dir = tempfile::tempdir().unwrap();
    let (log, profiles) = instance(dir.path());
    let newcomer: Value = serde_json::from_str(
        std::fs::read_to_string(&profiles).unwrap().lines().last().unwrap(),
    )
    .unwrap();
    let category = newcomer["able"][0].as_str().unwrap();
    let report = json(&run(&[
        "eval",
        "--log",
        p(&log),
        "--profiles",
        p(&profiles),
        "--trustor",
        "a0000",
        "--trustee",
        newcomer["id"].as_str().unwrap(),
        "--category",
        category,
        "--time",
        "100",
    ]));
    assert_eq!(report["alpha"], 0.0);
    assert_eq!(report["beta"], 0.0);
    for key in ["trust", "direct", "indirect", "reputation", "diagnostics"] {
        assert!(report.get(key).is_some(), "{key}");
    }
    let rep = json(&run(&["reputation", "--log", p(&log), "--time", "100"]));
    assert_eq!(report["trust"], rep["mean_reputation"]);
}

#[test]
fn paths_dump_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let (log, _) = instance(dir.path());
    let out = json(&run(&[
        "paths", "--log", p(&log), "--trustor", "a0000", "--trustee", "a0003", "--category", "c0",
        "--time", "100",
    ]));
    let rows = out["table"]["rows"].as_array().unwrap();
    assert_eq!(rows[0]["agent"], "a0000");
    assert!(out["indirect"].get("retained").is_some());
}

#[test]
fn usage_errors_exit_one() {
    let out = run(&["eval", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.jsonl");
    std::fs::write(
        &log,
        "{\"trustor\":\"A\",\"trustee\":\"B\",\"rating\":0.6,\"category\":\"c\",\"time\":1}\n\
         {\"trustor\":\"A\",\"trustee\":\"B\",\"rating\":1.5,\"category\":\"c\",\"time\":2}\n",
    )
    .unwrap();
    let query = |extra: &[&str]| {
        let mut args = vec![
            "eval", "--log", p(&log), "--trustor", "A", "--trustee", "B", "--category", "c",
            "--time", "10",
        ];
        args.extend_from_slice(extra);
        run(&args)
    };
    let strict = query(&[]);
    assert_eq!(strict.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&strict.stderr);
    assert!(stderr.contains("line 2") && stderr.contains("rating"), "{stderr}");

    let lenient = json(&query(&["--lenient"]));
    assert_eq!(lenient["direct"], 0.6);

    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"q": 1.5}"#).unwrap();
    let bad_config = query(&["--lenient", "--config", p(&config)]);
    assert_eq!(bad_config.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_config.stderr).contains("q must lie in (0,1)"));

    let unknown = run(&[
        "eval", "--log", p(&log), "--lenient", "--trustor", "A", "--trustee", "Z", "--category",
        "c", "--time", "10",
    ]);
    assert_eq!(unknown.status.code(), Some(1));
    assert_eq!(run(&["reputation", "--log", "/nonexistent", "--time", "1"]).status.code(), Some(1));
}

#[test]
fn snapshot_save_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let (log, profiles) = instance(dir.path());
    let snap = dir.path().join("env.snap");
    let saved = json(&run(&[
        "snapshot", "save", "--log", p(&log), "--profiles", p(&profiles), "--time", "100",
        "--out", p(&snap),
    ]));
    let shown = json(&run(&["snapshot", "show", "--file", p(&snap)]));
    assert_eq!(shown["agents"], 10);
    assert_eq!(shown["edges"], saved["edges"]);
    assert_eq!(shown["config_digest"], saved["config_digest"]);
    let rep = json(&run(&["reputation", "--log", p(&log), "--time", "100"]));
    assert_eq!(shown["reputation"]["reputation"], rep["reputation"]);

    let bytes = std::fs::read(&snap).unwrap();
    std::fs::write(&snap, &bytes[..bytes.len() / 2]).unwrap();
    let broken = run(&["snapshot", "show", "--file", p(&snap)]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("checksum"));
}

#[test]
fn oracle_report() {
    let out = json(&run(&["oracle", "--instances", "20", "--reputation-instances", "5"]));
    assert_eq!(out["passed"], true);
    assert_eq!(out["indirect"]["acyclic_mismatched_instances"], 0);
    assert!(out["indirect"]["max_deviation"].as_f64().unwrap() <= 1e-9);
    assert_eq!(run(&["oracle", "--max-agents", "13"]).status.code(), Some(1));
}
