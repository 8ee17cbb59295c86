//! End-to-end CLI behavior: flags, config files, exit codes, and the resume
//! ledger.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polymer"))
}

fn tmp(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("polymer-cli-{}-{name}", std::process::id()))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn malformed_alpha_exits_2_with_range_message() {
    let out = run(&[
        "exponent",
        "--experiment",
        "var",
        "--alpha",
        "0.3",
        "--out",
        tmp("bad-alpha").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[0, 0.25]"), "stderr: {err}");
}

#[test]
fn unknown_identity_test_exits_2() {
    let out = run(&["identities", "--only", "burke,nonsense", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn identities_subset_runs_and_reproduces() {
    let a = run(&["identities", "--only", "dufresne", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = run(&["identities", "--only", "dufresne", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    let line = String::from_utf8_lossy(&a.stdout);
    assert!(line.contains("\"name\":\"dufresne\""));
    assert!(line.contains("\"passed\":true"));
}

#[test]
fn simulate_requires_kind_and_validates_delta() {
    let out = run(&["simulate", "--n", "4", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate", "--kind", "ptp", "--n", "4", "--t", "1", "--delta", "-0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate", "--kind", "ptp", "--n", "4", "--t", "1", "--delta", "0.01", "--auto-delta",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_fills_defaults_and_flags_win() {
    let dir = tmp("cfgfile");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("run.cfg");
    std::fs::write(
        &cfg_path,
        "kind=ptp\nn=3\nt=1\nzero-env=true\ndelta=0.001\nreplicas=5\n",
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = bin()
        .args([
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    // zero-env forces a single deterministic replica; log Z = -log 2
    assert_eq!(summary["replicas"], 1);
    let got = summary["mean_log_z"].as_f64().unwrap();
    assert!((got + 0.5f64.ln().abs()).abs() < 5e-3);
    // flag overrides the file value
    let out2_dir = dir.join("out2");
    let out2 = bin()
        .args([
            "simulate",
            "--config",
            cfg_path.to_str().unwrap(),
            "--n",
            "2",
            "--out",
            out2_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out2.status.code(), Some(0));
    let summary2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out2_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary2["n"], 2);
    std::fs::remove_dir_all(&dir).ok();
}

fn exponent_args<'a>(out: &'a Path, extra: &[&'a str]) -> Vec<String> {
    let mut v: Vec<String> = [
        "exponent",
        "--experiment",
        "var",
        "--alpha",
        "0",
        "--n",
        "4,8,16,32",
        "--replicas",
        "16",
        "--seed",
        "5",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    v.push(out.to_str().unwrap().into());
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let dir = tmp("resume");
    std::fs::create_dir_all(&dir).unwrap();
    let full = dir.join("full");
    let out = bin().args(exponent_args(&full, &[])).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // simulate an interruption: unfinished manifest + truncated ledger
    let part = dir.join("part");
    std::fs::create_dir_all(&part).unwrap();
    let rows = std::fs::read_to_string(full.join("rows.jsonl")).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    let keep = lines.len() / 3;
    let mut truncated = lines[..keep].join("\n");
    truncated.push('\n');
    truncated.push_str("{\"torn"); // torn final line
    std::fs::write(part.join("rows.jsonl"), truncated).unwrap();
    let manifest = std::fs::read_to_string(full.join("manifest.json")).unwrap();
    let mut m: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    m["finished_unix"] = serde_json::Value::Null;
    m["tasks_done"] = serde_json::json!(keep);
    std::fs::write(part.join("manifest.json"), serde_json::to_string_pretty(&m).unwrap()).unwrap();

    // without --resume the unfinished directory is refused
    let refused = bin().args(exponent_args(&part, &[])).output().unwrap();
    assert_eq!(refused.status.code(), Some(3));

    // resuming completes it identically
    let resumed = bin().args(exponent_args(&part, &["--resume"])).output().unwrap();
    assert_eq!(
        resumed.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&resumed.stderr)
    );
    for file in ["rows.jsonl", "rows.csv", "summary.json", "fits.json"] {
        let a = std::fs::read(full.join(file)).unwrap();
        let b = std::fs::read(part.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs after resume");
    }

    // conflicting flags are refused with exit 3
    let mut conflict = exponent_args(&part, &["--resume"]);
    let pos = conflict.iter().position(|a| a == "5").unwrap();
    conflict[pos] = "6".into(); // different seed
    let bad = bin().args(conflict).output().unwrap();
    assert_eq!(bad.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn kpz_simulate_runs() {
    let dir = tmp("kpzsim");
    let out = bin()
        .args([
            "simulate", "--kind", "kpz", "--n", "16", "--tau", "1", "--replicas", "20",
            "--seed", "3", "--delta", "0.02", "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.join("rows.jsonl")).unwrap();
    assert_eq!(rows.lines().count(), 20);
    std::fs::remove_dir_all(&dir).ok();
}
