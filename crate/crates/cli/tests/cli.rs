use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bhedge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bhedge"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("running bhedge")
}

#[test]
fn lattice_writes_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = bhedge(dir.path(), &["lattice"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let strategies = fs::read_to_string(dir.path().join("lattice_strategies.csv")).unwrap();
    assert!(strategies.starts_with("index,s1,global,backward\n"));
    assert_eq!(strategies.lines().count(), 7);
    let comparison = fs::read_to_string(dir.path().join("lattice_comparison.csv")).unwrap();
    assert!(comparison.contains("total,,0.7180,0.7303"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "lattice");
    assert_eq!(manifest["run"]["tail_fraction"], 0.4);
}

#[test]
fn empty_experiment_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, "name = \"empty\"\n[matrix]\nN = []\n").unwrap();
    let out = bhedge(dir.path(), &["experiment", "--config", spec.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("scenario,replication,N,M"));
}

#[test]
fn solve_small_linear_claim() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "N = 2\nM = 200\nM0 = 2000\nM1 = 2000\nN_T = 4\nN_S = 5\npayoff = \"spot\"\n").unwrap();
    let out = bhedge(dir.path(), &["solve", "--config", cfg.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let row: Vec<f64> = summary.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((row[0] - 100.0).abs() < 0.1, "price {}", row[0]);
    assert!(dir.path().join("policy.txt").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["run"]["config"]["seed"], 3);
    assert_eq!(manifest["run"]["config"]["N"], 2);
}

#[test]
fn bad_settings_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = bhedge(dir.path(), &["solve", "--set", "no_such_key=1"]);
    assert!(!out.status.success());
    let out = bhedge(dir.path(), &["surface", "--set", "N=2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}
