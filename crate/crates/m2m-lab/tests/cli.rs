//! Black-box tests of the command-line binary: determinism of artifacts,
//! exit codes, and the machine-readable error contract.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_m2m-lab")
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_run_file(root: &Path, file: &str) -> Vec<u8> {
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 1, "expected exactly one run directory under {root:?}");
    std::fs::read(dirs.pop().unwrap().join(file)).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let scenario = scenario_path("office.json");
    for dir in [a.path(), b.path()] {
        let out = run(
            &["simulate", "--scenario", scenario.to_str().unwrap(), "--translator", "oracle"],
            dir,
        );
        assert!(out.status.success(), "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["scenario.json", "metrics.csv", "corpus_a.ndjson", "corpus_b.ndjson", "coobs.ndjson"] {
        assert_eq!(
            read_run_file(a.path(), file),
            read_run_file(b.path(), file),
            "{file} differs between identical simulate runs"
        );
    }
}

#[test]
fn evaluate_oracle_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenario_path("office-probed.json");
    let out = run(
        &["evaluate", "--scenario", scenario.to_str().unwrap(), "--translator", "oracle"],
        dir.path(),
    );
    assert!(out.status.success(), "evaluate failed: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_slice(&read_run_file(dir.path(), "report.json")).unwrap();
    assert_eq!(report["translator_a_to_b"], "oracle");
    // the engineered translator reproduces its own reference rollout
    assert_eq!(report["loss_causation"], 0.0);
}

#[test]
fn gen_pairs_emits_ndjson() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = scenario_path("office.json");
    let out = run(
        &["gen-pairs", "--scenario", scenario.to_str().unwrap(), "--count", "40"],
        dir.path(),
    );
    assert!(out.status.success(), "gen-pairs failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("pairs.ndjson")).unwrap();
    assert_eq!(text.lines().count(), 40);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("a").is_some() && v.get("b").is_some() && v.get("id").is_some());
    }
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gradcheck", "--seed", "3"], dir.path());
    assert!(out.status.success(), "gradcheck failed: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn errors_are_machine_readable_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["evaluate", "--scenario", "/no/such/scenario.json"], dir.path());
    assert!(!out.status.success());
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("stderr is one JSON object");
    assert!(err.get("error").is_some(), "missing error field in {err}");
    assert!(err.get("kind").is_some(), "missing kind field in {err}");
}

#[test]
fn help_documents_every_subcommand() {
    let out = Command::new(bin()).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "simulate", "gen-pairs", "train-e2e", "train-ae", "train-latent", "evaluate",
        "roundtrip", "serve", "gradcheck",
    ] {
        assert!(text.contains(sub), "--help does not mention {sub}");
    }
}
