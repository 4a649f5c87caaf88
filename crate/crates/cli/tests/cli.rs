use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dmfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmfg")).args(args).output().expect("run dmfg")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sample_specs_validate() {
    for name in ["prisoner.toml", "folk-repeated.toml", "sir-demo.toml"] {
        let out = dmfg(&["validate", s(&repo_file(&format!("specs/{name}")))]);
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn bad_mass_and_syntax_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(repo_file("specs/prisoner.toml")).unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text.replace("m0 = [1.0, 0.0]", "m0 = [0.7, 0.0]")).unwrap();
    let out = dmfg(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("total mass"));

    std::fs::write(&bad, text.replace("kind = \"discounted\"", "kind = discounted")).unwrap();
    let out = dmfg(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 11"));
}

#[test]
fn solve_prisoner_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&["solve", "--scenario", "prisoner-mfg", "--out", s(dir.path())]);
    assert!(out.status.success());
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["format_version"], 1);
    assert!(summary["exploitability"].as_f64().unwrap() < 1e-6);
    assert!(dir.path().join("strategy.csv").is_file());
    let mpath = std::fs::read_to_string(dir.path().join("mpath.csv")).unwrap();
    assert!(mpath.starts_with("t,m_1,m_2\n"));
    assert!(dir.path().join("meta.json").is_file());
}

#[test]
fn solve_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = dmfg(&["solve", "--scenario", "sir-demo", "--max-iters", "5", "--out", s(d.path())]);
        assert!(out.status.success());
    }
    for f in ["summary.json", "strategy.csv", "mpath.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn nonexistence_reports_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&["solve", "--scenario", "nonexistence", "--damping", "fixed:1", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["converged"], false);
}

#[test]
fn folk_solve_is_all_defect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&["solve", "--scenario", "folk-repeated", "--out", s(dir.path())]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("strategy.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let expected = if f[2] == "2" { "1" } else { "0" };
        assert_eq!(f[3], expected, "{line}");
    }
}

#[test]
fn simulate_grim_is_exact_and_single_rep_has_no_interval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&[
        "simulate", "--scenario", "folk-repeated", "--n", "30", "--reps", "4", "--seed", "12",
        "--strategy", "grim:2", "--trace", "--out", s(dir.path()),
    ]);
    assert!(out.status.success());
    let est = read_json(&dir.path().join("estimate.json"));
    let expected = -1.0 - 0.9f64.powi(2);
    assert!((est["estimate"]["mean"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert!(est["estimate"]["stderr"].as_f64().unwrap() < 1e-12);
    assert_eq!(est["mean_field_deviation"].as_f64().unwrap(), 0.0);
    assert!(est["rng"].as_str().unwrap().contains("ChaCha8"));
    let trace = std::fs::read_to_string(dir.path().join("trace_0.csv")).unwrap();
    assert!(trace.starts_with("t,event_player,new_state,M_1,M_2\n"));

    let out = dmfg(&[
        "simulate", "--scenario", "prisoner-mfg", "--n", "10", "--reps", "1", "--strategy", "always:D",
        "--out", s(dir.path()),
    ]);
    assert!(out.status.success());
    let est = read_json(&dir.path().join("estimate.json"));
    assert!(est["estimate"].get("stderr").is_none());
    assert!(est["estimate"].get("ci95").is_none());
    assert_eq!(est["estimate"]["R"], 1);
}

#[test]
fn simulate_large_population_tracks_the_mean_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&[
        "simulate", "--scenario", "prisoner-mfg", "--n", "1000", "--reps", "100", "--t-end", "10",
        "--strategy", "always:D", "--out", s(dir.path()), "--threads", "4",
    ]);
    assert!(out.status.success());
    let est = read_json(&dir.path().join("estimate.json"));
    assert!(est["mean_field_deviation"].as_f64().unwrap() < 0.05);
}

#[test]
fn exploit_from_names_and_files() {
    let out = dmfg(&["exploit", "--scenario", "prisoner-mfg", "--strategy", "always:D"]);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(v < 1e-6);
    let out = dmfg(&["exploit", "--scenario", "prisoner-mfg", "--strategy", "always:C"]);
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(v > 0.1);

    let dir = tempfile::tempdir().unwrap();
    assert!(dmfg(&["solve", "--scenario", "prisoner-mfg", "--out", s(dir.path())]).status.success());
    let file = dir.path().join("strategy.csv");
    let out = dmfg(&["exploit", "--spec", s(&repo_file("specs/prisoner.toml")), "--strategy", s(&file)]);
    assert!(out.status.success());
    let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
    assert!(v < 1e-6);
}

#[test]
fn invalid_strategy_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("s.csv");
    std::fs::write(&file, "t,state,action,prob\n0,1,C,0.5\n0,2,D,1\n").unwrap();
    let out = dmfg(&[
        "simulate", "--scenario", "prisoner-mfg", "--n", "5", "--strategy", s(&file), "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_grid_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmfg(&[
        "solve", "--scenario", "prisoner-mfg", "--t-end", "40", "--grid-steps", "20", "--out", s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
