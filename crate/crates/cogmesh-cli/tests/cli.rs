//! End-to-end checks of the `cogmesh` binary: every subcommand, the
//! replay-equals-run guarantee, and the failure exits.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cogmesh(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogmesh"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Small dense single-node-friendly world so debug builds stay quick.
const QUICK_CONFIG: &str = r#"
service_density = 12
composition_length = 3
abstract_services = 6
requests_per_user = 2
range_m = 400.0
arena = [500.0, 500.0]
"#;

#[test]
fn run_writes_metrics_and_replay_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("quick.toml"), QUICK_CONFIG).unwrap();

    let run = cogmesh(
        &["run", "--config", "quick.toml", "--seed", "7", "--runs", "2", "--out", "results"],
        dir.path(),
    );
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    let metrics = fs::read_to_string(dir.path().join("results/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(
        lines.next().unwrap(),
        "seed,mode,mobility,density,cl,config_id,pfr,efr,ct_s,mu_bytes,cycles"
    );
    let first_row = lines.next().unwrap().to_owned();
    assert!(first_row.starts_with("7,flexibility,slow,12,3,C1,"));
    assert_eq!(lines.count(), 1, "one row per seed");

    // Replaying the recorded bundle emits byte-identical metrics.
    let replay = cogmesh(&["replay", "results/experiment.toml"], dir.path());
    assert!(replay.status.success(), "{}", String::from_utf8_lossy(&replay.stderr));
    let text = stdout(&replay);
    assert!(text.contains(&first_row), "replay row differs:\n{text}");
    assert!(text.contains("request 0 (user 0):"), "trace missing:\n{text}");
}

#[test]
fn replay_of_a_missing_bundle_fails_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogmesh(&["replay", "no-such-experiment.toml"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no-such-experiment.toml"), "diagnostic names the file: {err}");
}

#[test]
fn run_rejects_an_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "composition_length = 1").unwrap();
    let out = cogmesh(&["run", "--config", "bad.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("composition_length"));
}

#[test]
fn sweep_writes_cell_summaries_and_report_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("plan.toml"),
        r#"
name = "smoke"
[grid]
mobility = ["slow"]
density = [12]
composition_length = [3]
attention = ["C2"]
[base]
abstract_services = 6
requests_per_user = 1
range_m = 400.0
arena = [500.0, 500.0]
"#,
    )
    .unwrap();

    let sweep = cogmesh(
        &["sweep", "--config", "plan.toml", "--runs", "2", "--out", "results", "--parallel", "2"],
        dir.path(),
    );
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let summary = fs::read_to_string(dir.path().join("results/summary.csv")).unwrap();
    assert!(summary.contains("flexibility,C2,3,slow,12,2,"), "{summary}");

    // `report` over the sweep's metrics is a pure function: same cells.
    let report = cogmesh(&["report", "results/metrics.csv"], dir.path());
    assert!(report.status.success());
    let again = cogmesh(&["report", "results/metrics.csv"], dir.path());
    assert_eq!(stdout(&report), stdout(&again));
    assert!(stdout(&report).contains("mode=flexibility config=C2 length=3"));
}

#[test]
fn learn_params_writes_a_constraint_respecting_config() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("quick.toml"),
        r#"
service_density = 12
composition_length = 3
abstract_services = 10
requests_per_user = 1
range_m = 400.0
arena = [500.0, 500.0]
"#,
    )
    .unwrap();
    let out = cogmesh(
        &[
            "learn-params",
            "--config",
            "quick.toml",
            "--runs",
            "6",
            "--tuning",
            "conflict-sensitive",
            "--out",
            "results",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let learned = fs::read_to_string(dir.path().join("results/learned-params.toml")).unwrap();
    let params: toml::Value = toml::from_str(&learned).unwrap();
    let gamma = params["goal_energy"].as_float().unwrap();
    let delta = params["protected_goal_energy"].as_float().unwrap();
    assert!(delta > gamma, "learned config keeps δ > γ: {learned}");
}
