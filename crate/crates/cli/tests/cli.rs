use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const ROUND: &str = r#"seed = 1
[metric]
model = "round"
dim = 2
params = []
[loop]
delta = 0.1
k = 8
[search]
samples = 16
window = [1.0, 50.0]
[diagnostics]
coverage_grid = 10
scan_samples = 50
"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zoll")).args(args).output().unwrap()
}

fn setup(dir: &Path, toml: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, toml).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_delta_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &ROUND.replace("delta = 0.1\n", ""));
    let out = run(&["find", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), &ROUND.replace("samples = 16", "samples = 16\nsampels = 3"));
    let out = run(&["find", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn find_writes_the_round_levels_and_index_checks_bott() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), ROUND);
    let o = dir.path().join("o");
    let out = run(&["find", "--config", s(&cfg), "--out", s(&o)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let levels = fs::read_to_string(o.join("levels.csv")).unwrap();
    let rows: Vec<Vec<&str>> = levels.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let e: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!((e[0] - 0.04).abs() < 1e-9);
    assert!((e[1] - 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-6);
    assert_eq!(rows[2][1], "ZigZag");
    assert!(o.join("config.toml").exists());
    assert!(fs::read_to_string(o.join("survey.csv")).unwrap().lines().count() >= 4);

    let smooth = fs::read_dir(o.join("points"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| fs::read_to_string(p).unwrap().contains("SmoothGeodesic"))
        .unwrap();
    let out = run(&["index", "--config", s(&cfg), "--out", s(&o), s(&smooth), "--check-bott", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stem = smooth.file_stem().unwrap().to_str().unwrap();
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join(format!("index_{stem}.json"))).unwrap()).unwrap();
    assert_eq!(rep["spectral"]["index"], 1);
    assert_eq!(rep["spectral"]["kernel"], 3);
    for row in rep["bott"].as_array().unwrap() {
        assert_eq!(row["measured"], row["expected"]);
    }
}

#[test]
fn diagnose_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), ROUND);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for o in [&a, &b] {
        let out = run(&["diagnose", "--config", s(&cfg), "--out", s(o), "--seed", "4"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["report.json", "report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(rep["scan"]["verdict"]["verdict"], "Zoll");
}

#[test]
fn cover_hits_on_the_round_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), ROUND);
    let o = dir.path().join("o");
    let e = format!("{}", 4.0 * std::f64::consts::PI.powi(2));
    let out = run(&["cover", "--config", s(&cfg), "--out", s(&o), "--point", "0.2,-0.5,0.7", "--energy", &e]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("cover.json")).unwrap()).unwrap();
    assert_eq!(rep[0]["hit"], true);
    assert!(o.join("cover_polylines/hit_000.txt").exists());
    let bad = run(&["cover", "--config", s(&cfg), "--out", s(&o), "--point", "1,0", "--energy", &e]);
    assert_eq!(bad.status.code(), Some(2));
}
