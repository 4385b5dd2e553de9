//! Drives the compiled binary end to end: exit codes, report fields,
//! dump round trips, and the par/seq digest agreement.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn pm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pm"))
}

fn run_pm(args: &[&str]) -> Output {
    pm().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const SWAP: &str = r#"{
  "dimension": 1,
  "domain": {"min": [0.0], "max": [1.5]},
  "cutoff": 1.0,
  "method": {"name": "ExchangeDiffusion"},
  "global": {"t": 1, "t_max": 2},
  "particles": [
    {"id": 1, "x": [0.25], "props": {"h": 10, "a": 0, "c": 0}},
    {"id": 2, "x": [1.25], "props": {"h": 4, "a": 0, "c": 0}}
  ]
}"#;

const WALK: &str = r#"{
  "dimension": 1,
  "domain": {"min": [0.0], "max": [3.5]},
  "cutoff": 1.0,
  "method": {"name": "LatticeWalk", "params": {"walk_seed": 7}},
  "global": {"t": 1, "t_max": 5},
  "particles": [
    {"id": 1, "x": [0.25], "props": {}},
    {"id": 2, "x": [1.5], "props": {}},
    {"id": 3, "x": [3.0], "props": {}}
  ]
}"#;

fn write_instance(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn seq_run_reports_the_final_state() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let out_path = dir.path().join("final.json");

    let out = run_pm(&["run", inst.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["engine"], "seq");
    assert_eq!(report["t"], 2);
    assert_eq!(report["states_visited"], 2);
    assert_eq!(report["particles"], 2);
    assert!(report["digest"].as_str().unwrap().starts_with("sha256:"));

    let dump = read(&out_path);
    let doc: Value = serde_json::from_str(&dump).unwrap();
    // One transition swaps the heat values.
    assert_eq!(doc["particles"][0]["id"], 1);
    assert_eq!(doc["particles"][0]["props"]["h"], 4);
    assert_eq!(doc["particles"][1]["props"]["h"], 10);
}

#[test]
fn par_run_matches_seq_digest_in_both_modes() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let inst = inst.to_str().unwrap();

    let seq = stdout_json(&run_pm(&["run", inst]));
    for mode in ["reference", "concurrent"] {
        let out = run_pm(&["run", inst, "--engine", "par", "--mode", mode]);
        assert_eq!(code(&out), 0);
        let par = stdout_json(&out);
        assert_eq!(par["digest"], seq["digest"], "mode {mode}");
        assert_eq!(par["mode"], mode);
    }
}

#[test]
fn dump_load_dump_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "walk.json", WALK);
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");

    let out = run_pm(&["run", inst.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    // The dump is a stopped instance: rerunning it makes no transitions.
    let out = run_pm(&["run", first.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["transitions"], 0);
    assert_eq!(read(&first), read(&second));
}

#[test]
fn trace_and_audit_artifacts() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "walk.json", WALK);
    let inst = inst.to_str().unwrap();
    let trace = dir.path().join("trace.json");
    let audit = dir.path().join("audit.csv");
    let view = dir.path().join("procs.json");

    let out = run_pm(&["run", inst, "--trace", trace.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let states: Value = serde_json::from_str(&read(&trace)).unwrap();
    // t_max 5 from t 1: initial state plus four transitions.
    assert_eq!(states.as_array().unwrap().len(), 5);
    assert_eq!(states[0]["global"]["t"], 1);
    assert_eq!(states[4]["global"]["t"], 5);

    let out = run_pm(&[
        "run", inst,
        "--engine", "par",
        "--audit", audit.to_str().unwrap(),
        "--procs-view", view.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let csv = read(&audit);
    assert!(csv.starts_with("phase,k,reader,target,kind,payload_size\n"));
    assert!(csv.lines().count() > 1);

    let procs: Value = serde_json::from_str(&read(&view)).unwrap();
    let procs = procs.as_array().unwrap();
    // Domain [0, 3.5) at cutoff 1 spans four cells; one process each.
    assert_eq!(procs.len(), 4);
    assert_eq!(procs[0]["compartments"].as_array().unwrap().len(), 3);
}

#[test]
fn par_state_dump_brings_its_audit_log() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let out_path = dir.path().join("final.json");

    let out = run_pm(&[
        "run", inst.to_str().unwrap(),
        "--engine", "par",
        "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    let audit_path = dir.path().join("final.audit.csv");
    assert_eq!(report["audit"], audit_path.to_str().unwrap());
    assert!(read(&audit_path).starts_with("phase,k,reader,target,kind,payload_size\n"));
}

#[test]
fn flags_are_engine_checked() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let inst = inst.to_str().unwrap();

    let out = run_pm(&["run", inst, "--audit", "x.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--engine par"));

    let out = run_pm(&["run", inst, "--engine", "par", "--trace", "x.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--engine seq"));
}

#[test]
fn malformed_input_exits_2_and_names_the_fault() {
    let dir = TempDir::new().unwrap();

    let missing = run_pm(&["run", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(code(&missing), 2);

    let truncated = write_instance(&dir, "cut.json", &SWAP[..60]);
    let out = run_pm(&["run", truncated.to_str().unwrap()]);
    assert_eq!(code(&out), 2);

    let misnamed = write_instance(&dir, "prop.json", &SWAP.replace("\"h\": 10", "\"hh\": 10"));
    let out = run_pm(&["run", misnamed.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown property 'hh'"));

    let outside = write_instance(&dir, "escape.json", &SWAP.replace("[0.25]", "[2.25]"));
    let out = run_pm(&["run", outside.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn step_limit_exits_1() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let out = run_pm(&["run", inst.to_str().unwrap(), "--max-steps", "0"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no stop"));
}

#[test]
fn verify_instance_passes_for_built_ins() {
    let dir = TempDir::new().unwrap();
    for (name, text) in [("swap.json", SWAP), ("walk.json", WALK)] {
        let inst = write_instance(&dir, name, text);
        let out = run_pm(&["verify", inst.to_str().unwrap(), "--mode", "concurrent"]);
        assert_eq!(code(&out), 0, "{name}");
        let report = stdout_json(&out);
        assert_eq!(report["pass"], true);
        assert_eq!(report["equivalence"]["match"], true);
        assert_eq!(report["motion"]["pass"], true);
    }
}

#[test]
fn verify_suite_passes_on_a_small_family() {
    let out = run_pm(&["verify", "--suite", "lemmas", "--max-cells", "27", "--seed", "3"]);
    assert_eq!(code(&out), 0);
    let report = stdout_json(&out);
    assert_eq!(report["pass"], true);
    assert!(!report["checks"].as_array().unwrap().is_empty());

    let neither = run_pm(&["verify"]);
    assert_eq!(code(&neither), 2);
}

#[test]
fn speedup_emits_csv_and_rejects_bad_sweeps() {
    let out = run_pm(&["speedup", "--model", "amdahl", "--sweep", "1:20"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("model,x,speedup"));
    let values: Vec<f64> = lines
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 20);
    assert!(values.windows(2).all(|w| w[1] >= w[0]));

    let out = run_pm(&["speedup", "--model", "amdahl", "--sweep", "9:1"]);
    assert_eq!(code(&out), 2);
    let out = run_pm(&["speedup", "--model", "warp", "--sweep", "1:9"]);
    assert_eq!(code(&out), 2);
    // 900 cells split over 3^3 processes per phase needs d to divide evenly.
    let out = run_pm(&["speedup", "--model", "amdahl", "--sweep", "1:9", "--d", "3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn pm_threads_env_is_validated() {
    let dir = TempDir::new().unwrap();
    let inst = write_instance(&dir, "swap.json", SWAP);
    let inst = inst.to_str().unwrap();

    let out = pm()
        .args(["run", inst, "--engine", "par", "--mode", "concurrent"])
        .env("PM_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);

    let out = pm().args(["run", inst]).env("PM_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PM_THREADS"));
}
