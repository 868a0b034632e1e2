use std::path::Path;
use std::process::{Command, Output};

use mirroreyes::scenario::{run_block, ScenarioScript, TrialMetrics};
use mirroreyes_gateway::SimConfig;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mirroreyes")).args(args).output().unwrap()
}

fn repo_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel).display().to_string()
}

#[test]
fn run_writes_outputs_matching_the_runner() {
    let out = tempfile::tempdir().unwrap();
    let scenario = repo_file("scenarios/instruction_set_mirror_eyes.json");
    let stops = "-,4.66,14.58,3.0,1,-";
    let res = bin(&["run", "--scenario", &scenario, "--stops", stops, "--out", out.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let trials: Vec<TrialMetrics> = serde_json::from_str(&std::fs::read_to_string(out.path().join("trials.json")).unwrap()).unwrap();
    let script: ScenarioScript = serde_json::from_str(&std::fs::read_to_string(&scenario).unwrap()).unwrap();
    let config = SimConfig::default();
    let stops = [None, Some(4.66), Some(14.58), Some(3.0), Some(1.0), None];
    assert_eq!(trials, run_block(&script, &stops, config.tick_rate, &config.timeline).unwrap());
    assert_eq!(trials.len(), 6);

    let metrics = std::fs::read_to_string(out.path().join("metrics.csv")).unwrap();
    assert_eq!(
        metrics,
        "error_step,condition,n,mean_s,sd_s,min_s,max_s\n1,mirror_eyes,2,2.83,1.83,1,4.66\n2,mirror_eyes,1,14.58,0,14.58,14.58\n"
    );
    let events = std::fs::read_to_string(out.path().join("events.jsonl")).unwrap();
    let count: usize = trials.iter().map(|t| t.events.len()).sum();
    assert_eq!(events.lines().count(), count);
    assert!(out.path().join("ecdf.csv").exists());
}

#[test]
fn record_dumps_frames() {
    let out = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("one.json");
    std::fs::write(
        &script,
        r#"{"condition":"mirror_eyes","trials":[{"instruction":"Put the red bottle onto the red plate"}]}"#,
    )
    .unwrap();
    let res = bin(&[
        "run",
        "--scenario",
        script.to_str().unwrap(),
        "--stops",
        "2.0",
        "--out",
        out.path().to_str().unwrap(),
        "--record",
        "25",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let frames = std::fs::read_dir(out.path().join("frames")).unwrap().count();
    assert!(frames >= 4, "{frames}");
    assert!(out.path().join("camera.png").exists());
}

#[test]
fn check_accepts_default_and_rejects_negative_dt() {
    let ok = bin(&["check"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"ik": {"dt": -0.01}}"#).unwrap();
    let res = bin(&["check", "--config", bad.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("dt"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(2));
    let out = tempfile::tempdir().unwrap();
    let res = bin(&[
        "run",
        "--scenario",
        &repo_file("scenarios/block_mirror_shuffled.json"),
        "--stops",
        "x",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let res = bin(&["run", "--scenario", "/nonexistent.json", "--out", out.path().to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
