//! End-to-end checks of the installed binary: exit codes, determinism of the
//! emitted files, and the shape of each subcommand's output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_spoofbench");
const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn cfg(name: &str) -> String {
    format!("{CONFIG_DIR}/{name}")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn spoofbench")
}

fn run_to_file(args: &[&str], out: &Path) -> Output {
    let mut v: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap().to_string();
    v.push("--out");
    let out_leaked: &str = Box::leak(out_s.into_boxed_str());
    v.push(out_leaked);
    run(&v)
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["sweep", "--help"]).status.code(), Some(0));
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let out = run(&["sweep", "--config", &cfg("ex1.cfg"), "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.to_lowercase().contains("usage"), "no usage text in: {text}");
}

#[test]
fn missing_config_file_names_the_path() {
    let out = run(&["sweep", "--config", "/nonexistent/nowhere.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("/nonexistent/nowhere.cfg"), "path missing from: {text}");
}

#[test]
fn bad_config_contents_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "schema_version = 1\n[plant]\nkind = scalar\n").unwrap();
    let out = run(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn degenerate_runtime_failure_exits_two() {
    // zero noise and zero gain leave the regressor identically zero: every
    // trial is invalid, which is a runtime error rather than a config error
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("degenerate.cfg");
    std::fs::write(
        &path,
        "schema_version = 1\n\
         [plant]\nkind = scalar\na = 0.0\nnoise_var = 0.0\ninit_var = 1.0\n\
         [controller]\nkind = zero\n\
         [attack]\nkind = learn_scalar\nwindow = 10\n\
         [detector]\nkind = variance\ndelta = 0.1\nhorizon = 60\n\
         [run]\ntrials = 5\nseed = 1\n",
    )
    .unwrap();
    let out = run(&["sweep", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid"));
}

fn sweep_bytes(out_path: &Path, extra: &[&str]) -> Vec<u8> {
    let mut args = vec!["sweep", "--config"];
    let c = cfg("ex1.cfg");
    let c_leaked: &str = Box::leak(c.into_boxed_str());
    args.push(c_leaked);
    args.extend_from_slice(&["--seed", "7", "--trials", "40"]);
    args.extend_from_slice(extra);
    let out = run_to_file(&args, out_path);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    std::fs::read(out_path).unwrap()
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = sweep_bytes(&dir.path().join("a.csv"), &[]);
    let b = sweep_bytes(&dir.path().join("b.csv"), &[]);
    assert_eq!(a, b);
    assert!(!a.is_empty());
}

#[test]
fn thread_count_does_not_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let one = sweep_bytes(&dir.path().join("t1.csv"), &["--threads", "1"]);
    let four = sweep_bytes(&dir.path().join("t4.csv"), &["--threads", "4"]);
    assert_eq!(one, four);
}

#[test]
fn sweep_json_mirrors_the_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("r.csv");
    let json_path = dir.path().join("r.json");
    sweep_bytes(&csv_path, &[]);
    sweep_bytes(&json_path, &["--format", "json"]);

    let csv_text = std::fs::read_to_string(&csv_path).unwrap();
    let n_rows = csv_text.lines().count() - 1; // header
    let parsed: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&json_path).unwrap()).unwrap();
    assert_eq!(parsed["rows"].as_array().unwrap().len(), n_rows);
    assert!(parsed["config_hash"].is_string());
    assert!(parsed["wall_time_s"].is_number());
    // explicit nulls for absent quantities: attacked sweeps carry no p_fa
    assert!(parsed["rows"][0]["p_fa"].is_null());
}

#[test]
fn trial_json_dumps_one_object_with_a_trajectory() {
    let out = run(&["trial", "--config", &cfg("ex1.cfg"), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(parsed["seed"].is_number());
    assert!(parsed["trajectory"]["states"].as_array().unwrap().len() > 100);
}

#[test]
fn trial_csv_dump_has_metadata_then_steps() {
    let out = run(&["trial", "--config", &cfg("ex1.cfg")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# "));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "step,state,control,observation,disturbance,hijacked");
}

#[test]
fn bounds_table_matches_the_hand_value() {
    let out = run(&["bounds", "--config", &cfg("ex2.cfg")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    // 1 - 2/(1.11)^10 at window 20, printed at 17 significant digits
    assert!(text.contains("2.9563104245106619e-1"), "table was:\n{text}");
}

#[test]
fn compare_emits_long_format_series() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cmp.csv");
    let out = run(&[
        "compare",
        "--config",
        &cfg("ex1.cfg"),
        "--trials",
        "30",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "axis_name,axis_value,series,value");
    assert!(text.lines().any(|l| l.contains(",p_dec,")));
    assert!(text.lines().any(|l| l.contains(",lb_thm1,")));
}

#[test]
fn all_golden_configs_are_loadable() {
    for entry in std::fs::read_dir(CONFIG_DIR).unwrap() {
        let path: PathBuf = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        let out = run(&["bounds", "--config", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "config {path:?} failed to load");
    }
}
