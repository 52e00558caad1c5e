use std::path::{Path, PathBuf};
use std::process::Command;

use sensor_sched::harness::metrics::read_csv_without_timing;

const BIN: &str = env!("CARGO_BIN_EXE_sensor-sched");

const SMALL: &str = r#"
kind = "single_step_schedule"
seed = 5
instances = 2
trials = 30

[model]
m = 3
n = 7
sigma = 1.0
measurements = { kind = "gaussian", sigma_h = 1.0 }

[scheduler]
k = 3
epsilons = [0.2, 0.6]
methods = ["classic_greedy", "randomized_greedy", "random_uniform", "brute_force_optimal"]
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).env("RUST_LOG", "warn").output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn invalid_epsilon_exits_2_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", &SMALL.replace("[0.2, 0.6]", "[1.5]"));
    let (code, _, err) = run(&["run", s(&cfg), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(code, 2);
    assert!(err.contains("scheduler.epsilons"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("k.toml", SMALL.replace("k = 3", "k = 8")),
        ("unknown.toml", SMALL.replace("seed = 5", "seed = 5\nseeds = 6")),
        ("trials.toml", SMALL.replace("trials = 30", "trials = 0")),
    ] {
        let cfg = write_config(dir.path(), name, &text);
        let (code, _, err) = run(&["run", s(&cfg), "--out-dir", s(dir.path())]);
        assert_eq!(code, 2, "{name}: {err}");
    }
    let (code, _, _) = run(&["run", s(&dir.path().join("missing.toml"))]);
    assert_eq!(code, 2);
    // a single-step config is not a network config
    let cfg = write_config(dir.path(), "ok.toml", SMALL);
    let (code, _, err) = run(&["network", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn oracle_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("n = 7", "n = 30").replace("k = 3", "k = 15");
    let cfg = write_config(dir.path(), "big.toml", &text);
    let (code, _, err) = run(&["run", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("too large"), "{err}");
}

#[test]
fn speedup_outside_band_exits_4_but_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
kind = "single_step_schedule"
trials = 3
[model]
m = 4
n = 200
sigma = 1.0
measurements = { kind = "gaussian", sigma_h = 1.0 }
[scheduler]
k = 20
epsilons = [0.9]
methods = ["classic_greedy", "randomized_greedy"]
"#;
    let cfg = write_config(dir.path(), "sp.toml", text);
    let out = dir.path().join("o");
    let (code, _, err) = run(&["speedup", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(code, 4, "{err}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["reports"][0]["entries"][0]["within_band"], false);
    assert!(out.join("metrics.csv").exists());
}

#[test]
fn reruns_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run(&["run", s(&cfg), "--out-dir", s(&a), "--threads", "1"]).0, 0);
    assert_eq!(run(&["run", s(&cfg), "--out-dir", s(&b), "--threads", "3"]).0, 0);
    assert_eq!(run(&["run", s(&cfg), "--out-dir", s(&c), "--seed", "6"]).0, 0);
    let read = |d: &Path| read_csv_without_timing(&d.join("metrics.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    // 2 instances × (brute + classic + 2·30 randomized + 30 random) rows plus the header
    assert_eq!(read(&a).len(), 1 + 2 * (1 + 1 + 60 + 30));
}

#[test]
fn json_format_writes_metrics_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    let (code, stdout, _) = run(&["run", s(&cfg), "--out-dir", s(&out), "--format", "json"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("metrics.json"));
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2 * 92);
    assert!(rows[0].get("wall_time_ns").is_some());
}

#[test]
fn verify_theorem1_passes_on_small_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    let (code, _, err) = run(&["verify-theorem1", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(code, 0, "{err}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["bound_violations"]["total"], 0);
    // classic greedy plus two values of ε, on each of two instances
    assert_eq!(summary["bound_checks"], 6);
}
