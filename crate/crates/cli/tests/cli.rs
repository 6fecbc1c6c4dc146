use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blendlab_cli::report::{POINTS_HEADER, SWEEP_HEADER};
use blendlab_cli::{run, validate, CliError, ExperimentConfig, Overrides};

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("blendlab-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn bin(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blendlab")).args(args).env("BLENDLAB_OUT_DIR", out).output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or_default().to_string()
}

#[test]
fn list_prints_registry_and_filters() {
    let d = scratch("list");
    let all = bin(&["list"], &d);
    assert!(all.status.success());
    assert_eq!(String::from_utf8_lossy(&all.stdout).lines().count(), 11);
    let some = bin(&["list", "blender"], &d);
    assert_eq!(String::from_utf8_lossy(&some.stdout).lines().count(), 3);
}

#[test]
fn run_writes_report_and_points() {
    let d = scratch("run");
    let o = bin(&["run", "ifs-density", "--seed", "4"], &d);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = d.join("ifs-density");
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["seed"], 4);
    assert_eq!(rep["pass"], true);
    let names: Vec<&str> = rep["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    let mut sorted = names.clone();
    sorted.sort_unstable();
    assert_eq!(names, sorted);
    assert_eq!(first_line(&dir.join("points.csv")), POINTS_HEADER.join(","));
}

#[test]
fn sweep_writes_csv() {
    let d = scratch("sweep");
    let cfg = ExperimentConfig::new("robustness-sweep").with_param("etas", vec![0.0, 0.01]).with_param("trials", 2);
    let rep = run(&cfg, &Overrides { out_dir: Some(d.clone()), ..Overrides::default() }).unwrap();
    assert!(rep.pass);
    assert!(rep.artifacts.contains(&"sweep.csv".to_string()));
    let text = std::fs::read_to_string(d.join("robustness-sweep/sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], SWEEP_HEADER.join(","));
    assert_eq!(lines.len(), 3);
}

#[test]
fn config_file_round_trip() {
    let d = scratch("file");
    let path = d.join("exp.toml");
    std::fs::write(&path, format!("experiment = \"recurrence-fraction\"\nseed = 9\n\n[params]\nsamples = 40\n\n[output]\ndir = \"{}\"\ncsv = false\n", d.join("out").display())).unwrap();
    let o = bin(&["run", path.to_str().unwrap(), "--json"], &d);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["params"]["samples"], 40);
    assert_eq!(rep["seed"], 9);
    // BLENDLAB_OUT_DIR wins over the file's output dir.
    assert!(d.join("recurrence-fraction/report.json").exists());
    assert!(!d.join("recurrence-fraction/points.csv").exists());
}

#[test]
fn invalid_configs_exit_with_two() {
    let d = scratch("invalid");
    let path = d.join("bad.toml");
    std::fs::write(&path, "experiment = \"chain-shadow\"\n[params]\nepz = 0.1\n").unwrap();
    let o = bin(&["validate", path.to_str().unwrap()], &d);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("params.epz"));

    assert_eq!(bin(&["run", "no-such-experiment"], &d).status.code(), Some(2));

    let cfg = ExperimentConfig::new("f-mu-minimality").with_param("k", 80);
    match validate(&cfg) {
        Err(CliError::ConfigInvalid { path, message }) => {
            assert_eq!(path, "params.k");
            assert!(message.contains("68"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let cfg = ExperimentConfig::new("f-mu-minimality").with_param("symbols", 10);
    assert!(matches!(validate(&cfg), Err(CliError::ConfigInvalid { .. })));
    let cfg = ExperimentConfig::new("robustness-sweep").with_param("verifier", "wiggle");
    assert!(matches!(validate(&cfg), Err(CliError::ConfigInvalid { .. })));
}

#[test]
fn exhausted_budget_exits_with_three() {
    let d = scratch("budget");
    let o = bin(&["run", "ifs-density", "--budget", "1"], &d);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ifs-density/report.json")).unwrap()).unwrap();
    assert_eq!(rep["budget"], 1);
    assert_eq!(rep["pass"], false);
}

#[test]
fn seed_changes_samples_but_not_verdicts() {
    let d = scratch("seeds");
    let cfg = ExperimentConfig::new("recurrence-fraction");
    let a = run(&cfg, &Overrides { seed: Some(1), out_dir: Some(d.join("a")), ..Overrides::default() }).unwrap();
    let b = run(&cfg, &Overrides { seed: Some(2), out_dir: Some(d.join("b")), ..Overrides::default() }).unwrap();
    assert!(a.pass && b.pass);
    let pa = std::fs::read(d.join("a/recurrence-fraction/points.csv")).unwrap();
    let pb = std::fs::read(d.join("b/recurrence-fraction/points.csv")).unwrap();
    assert_ne!(pa, pb);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        validate(&cfg).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}
