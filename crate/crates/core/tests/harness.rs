use std::path::Path;

use freebound::harness::{
    audit_scenario, parse_scenario, preset, preset_names, read_manifest, run_scenario, verify_manifest,
    DiagnosticsSelection, RunOptions, Scenario,
};
use freebound::model::{Exponent, InitialData, Regime};
use freebound::Error;

const MINIMAL: &str = r#"
name = "tiny"
m_values = [3.0]

[model]
horizon = 0.1

[model.domain]
lo = [-2.0]
hi = [2.0]

[model.init]
kind = "barenblatt"

[model.init.params]
t0 = 0.5
radius = 1.0
"#;

fn parse(text: &str) -> freebound::Result<Scenario> {
    parse_scenario(text, false, Path::new("test.toml"))
}

fn small(name: &str, out: &Path) -> Scenario {
    let mut s = preset("barenblatt").unwrap();
    s.name = name.into();
    s.m_values = vec![2.0, 10.0];
    s.cells = Some(64);
    s.frames = 4;
    s.output = out.to_path_buf();
    s
}

#[test]
fn every_preset_round_trips_through_toml() {
    for name in preset_names() {
        let s = preset(name).unwrap();
        let back = parse(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s, "{name}");
        assert_eq!(back.hash(), s.hash());
    }
}

#[test]
fn unknown_key_is_rejected_with_its_path() {
    let text = MINIMAL.replace("[model.domain]", "[model.domain]\nlow = [0.0]");
    let err = parse(&text).unwrap_err().to_string();
    assert!(err.contains("model.domain"), "{err}");
    assert!(err.contains("low"), "{err}");

    let text = format!("{MINIMAL}\n[solver]\ncfll = 0.3\n");
    let err = parse(&text).unwrap_err().to_string();
    assert!(err.contains("solver"), "{err}");
    assert!(err.contains("cfll"), "{err}");
}

#[test]
fn unknown_drift_kind_is_rejected() {
    let text = format!("{MINIMAL}\n[model.drift]\nkind = \"swirl\"\n");
    let err = parse(&text).unwrap_err();
    assert!(matches!(err, Error::Config { .. }));
    assert!(err.to_string().contains("model.drift"), "{err}");
}

#[test]
fn m_values_are_sorted_and_deduplicated() {
    let text = MINIMAL.replace("m_values = [3.0]", "m_values = [80.0, 10.0, 80.0]");
    assert_eq!(parse(&text).unwrap().m_values, vec![10.0, 80.0]);
}

#[test]
fn minimal_file_gets_defaults() {
    let s = parse(MINIMAL).unwrap();
    assert!(!s.include_limit);
    assert_eq!(s.resolved_cells(), 256);
    assert_eq!(s.frames, 10);
    assert_eq!(s.resolved_save_times().len(), 11);
    assert!(s.diagnostics.is_empty());
    assert!(s.write_snapshots);
    assert_eq!(s.seed, 0);
}

#[test]
fn json_scenarios_parse_like_toml() {
    let s = parse(MINIMAL).unwrap();
    let json = serde_json::to_string(&s).unwrap();
    assert_eq!(parse_scenario(&json, true, Path::new("s.json")).unwrap(), s);
}

#[test]
fn invalid_scenarios_are_refused() {
    assert!(parse(&MINIMAL.replace("m_values = [3.0]", "m_values = []")).is_err());
    assert!(parse(&MINIMAL.replace("m_values = [3.0]", "m_values = [1.0]")).is_err());
    assert!(parse(&MINIMAL.replace("name = \"tiny\"", "name = \"a/b\"")).is_err());
    assert!(parse(&format!("save_times = [0.5]\n{MINIMAL}")).is_err());
}

#[test]
fn save_times_always_include_the_endpoints() {
    let s = parse(&format!("save_times = [0.05, 0.05]\n{MINIMAL}")).unwrap();
    assert_eq!(s.resolved_save_times(), vec![0.0, 0.05, 0.1]);
}

#[test]
fn annulus_initial_density() {
    let s = preset("annulus_core").unwrap();
    assert!(matches!(s.model.init, InitialData::AnnulusPlusCore));
    let g = s.model.domain.grid(128).unwrap();
    let rho = s.model.init.density(g, Exponent::Infinite).unwrap();
    for k in 0..g.len() {
        let x = g.center(k);
        let r2 = x[0] * x[0] + x[1] * x[1];
        let want = if r2 <= 1.0 { 0.5 + 0.5 * r2 } else if r2 < 4.0 { 1.0 } else { 0.0 };
        assert_eq!(rho.values[k], want);
    }
}

#[test]
fn barenblatt_preset_is_audited_under_the_alternative_condition() {
    let s = preset("barenblatt").unwrap();
    let audits = audit_scenario(&s);
    assert_eq!(audits.len(), s.m_values.len());
    for (label, report) in audits {
        let r = report.unwrap();
        assert_eq!(r.regime, Regime::CondPrime, "{label}");
        assert!(r.satisfied.cond_prime);
    }
}

#[test]
fn r11_preset_satisfies_the_initial_compatibility() {
    let s = preset("r11_compatible").unwrap();
    for (label, report) in audit_scenario(&s).into_iter().filter(|(l, _)| l != "limit") {
        assert!(report.unwrap().satisfied.r11, "{label}");
    }
}

#[test]
fn run_writes_a_verifiable_inventory() {
    let tmp = tempfile::tempdir().unwrap();
    let s = small("inventory", tmp.path());
    let manifest = run_scenario(&s, &RunOptions { jobs: Some(2) }).unwrap();
    let dir = s.run_dir();
    assert_eq!(manifest.runs.len(), 2);
    assert!(manifest.runs.iter().all(|r| r.status == "ok"));
    assert_eq!(read_manifest(&dir).unwrap(), manifest);
    let paths: Vec<&str> = manifest.files.iter().map(|f| f.path.as_str()).collect();
    for want in ["scenario.toml", "runs/m2.json", "runs/m10.json", "frontiers/m2.csv", "snapshots/m10/rho_004.bin"] {
        assert!(paths.contains(&want), "{want} missing from {paths:?}");
    }
    assert!(verify_manifest(&dir, &manifest).unwrap().is_empty());

    std::fs::write(dir.join("frontiers/m2.csv"), "tampered").unwrap();
    std::fs::write(dir.join("extra.txt"), "x").unwrap();
    std::fs::remove_file(dir.join("runs/m10.json")).unwrap();
    let problems = verify_manifest(&dir, &manifest).unwrap();
    assert!(problems.iter().any(|p| p.contains("digest mismatch") && p.contains("frontiers/m2.csv")), "{problems:?}");
    assert!(problems.iter().any(|p| p.contains("missing") && p.contains("runs/m10.json")));
    assert!(problems.iter().any(|p| p.contains("not in manifest") && p.contains("extra.txt")));
}

#[test]
fn empty_diagnostics_selection_runs_solvers_only() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = small("bare", tmp.path());
    s.diagnostics = DiagnosticsSelection::default();
    s.write_snapshots = false;
    let manifest = run_scenario(&s, &RunOptions::default()).unwrap();
    assert!(manifest.diagnostics.is_empty(), "{:?}", manifest.diagnostics);
    assert!(manifest.all_pass);
    assert!(manifest.files.iter().all(|f| !f.path.starts_with("snapshots/")));
    assert!(manifest.files.iter().any(|f| f.path == "runs/m2.json"));
}

#[test]
fn runs_are_reproducible() {
    // scenario.toml records the output root, which differs between the two runs.
    let digests = |root: &Path| {
        let s = small("repeat", root);
        let m = run_scenario(&s, &RunOptions { jobs: Some(1) }).unwrap();
        m.files.into_iter().filter(|f| f.path != "scenario.toml").collect::<Vec<_>>()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(digests(a.path()), digests(b.path()));
}
