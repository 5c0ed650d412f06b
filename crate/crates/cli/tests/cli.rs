use std::path::Path;
use std::process::{Command, Output};

use freebound::harness::{parse_scenario, preset, preset_names};

fn freebound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freebound")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
name = "cli_small"
m_values = [2.0, 10.0]
cells = 64
frames = 4

[model]
horizon = 0.2

[model.domain]
lo = [-2.0]
hi = [2.0]

[model.init]
kind = "barenblatt"

[model.init.params]
t0 = 0.5
radius = 1.0

[diagnostics.oscillation]
"#;

#[test]
fn preset_list_names_every_preset() {
    let o = freebound(&["preset", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in preset_names() {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn preset_show_prints_a_parsable_scenario() {
    let o = freebound(&["preset", "show", "rotation_drift"]);
    assert_eq!(o.status.code(), Some(0));
    let s = parse_scenario(&stdout(&o), false, Path::new("stdout")).unwrap();
    assert_eq!(s, preset("rotation_drift").unwrap());
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = freebound(&["run", "no_such_preset"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_preset"));
    assert_eq!(freebound(&["preset", "show", "no_such_preset"]).status.code(), Some(2));
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(freebound(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(freebound(&["run", "barenblatt", "--grid", "many"]).status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, SMALL.replace("[model.domain]", "[model.domain]\nlow = [1.0]")).unwrap();
    let o = freebound(&["audit", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("model.domain") && err.contains("low"), "{err}");
}

#[test]
fn audit_of_a_preset_succeeds() {
    let o = freebound(&["audit", "barenblatt"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("cond_prime"));
}

#[test]
fn run_then_report_then_detect_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    let out = dir.path().join("out");
    let o = freebound(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("PASS oscillation"), "{text}");
    let run_dir = text.lines().find_map(|l| l.strip_prefix("output: ")).unwrap().trim().to_string();
    assert!(run_dir.starts_with(out.to_str().unwrap()));

    let o = freebound(&["report", &run_dir]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("integrity"));

    std::fs::write(Path::new(&run_dir).join("runs/m2.json"), "{}").unwrap();
    let o = freebound(&["report", &run_dir]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("integrity: digest mismatch: runs/m2.json"));
}

#[test]
fn report_on_a_missing_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = freebound(&["report", dir.path().join("absent").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
