use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bagvm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bagvm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

struct Fixture {
    _dir: TempDir,
    f2: String,
    g: String,
    dir: PathBuf,
}

fn fixture() -> Fixture {
    let dir = TempDir::new().unwrap();
    let f2 = write(dir.path(), "F2.json", r#"{"points":[-1,1]}"#);
    let g = write(dir.path(), "G.json", r#"{"points":[-1,-1,1]}"#);
    Fixture {
        f2: f2.to_str().unwrap().into(),
        g: g.to_str().unwrap().into(),
        dir: dir.path().to_path_buf(),
        _dir: dir,
    }
}

#[test]
fn bag_threshold_prints_quarter() {
    let fx = fixture();
    let o = bagvm(&["bag", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.25\n");
}

#[test]
fn influence_above_m_prints_zero() {
    let fx = fixture();
    let o = bagvm(&["influence", "--stat", "mean", "--dist", &fx.f2, "-M", "2", "-k", "3", "--points", "0,0,0"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0\n");
}

#[test]
fn influence_check_numeric_column() {
    let fx = fixture();
    let o = bagvm(&[
        "influence", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2", "-k", "1", "--points", "1",
        "--check-numeric",
    ]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("theorem,numeric"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|t| t.parse().unwrap()).collect();
    // M·α_1(1) with α_1(1) = μ_1(1) − μ_0 = 0.5 − 0.25
    assert!((row[0] - 0.5).abs() < 1e-12);
    assert!((row[0] - row[1]).abs() < 1e-6);
}

#[test]
fn expand_hand_case() {
    let fx = fixture();
    let o = bagvm(&["expand", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2", "--eval", &fx.g]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c: Vec<f64> = v["contributions"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(c.len(), 3);
    assert!((c[0] - 0.25).abs() < 1e-14);
    assert!((c[1] + 1.0 / 6.0).abs() < 1e-14);
    assert!((c[2] - 1.0 / 36.0).abs() < 1e-14);
    assert!((v["total"].as_f64().unwrap() - 1.0 / 9.0).abs() < 1e-14);
}

#[test]
fn expand_first_order() {
    let fx = fixture();
    let o = bagvm(&[
        "expand", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2", "--sample", "1,1", "--first-order",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0.75\n");
}

#[test]
fn path_csv_layout() {
    let fx = fixture();
    let o = bagvm(&["path", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "1,2", "--x", "1", "--grid", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(!out.contains('\r'));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "s,raw,bagged_M1,bagged_M2");
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[1], "0,,0.5,0.25");
    assert_eq!(lines[3], "0.5,,0.75,0.5625");
    assert_eq!(lines[5], "1,1,1,1");
}

#[test]
fn anova_and_superset_json() {
    let fx = fixture();
    let o = bagvm(&["anova", "--stat", "median", "--dist", &fx.f2, "-M", "3", "--sample", "1,-1,1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["orders"].as_array().unwrap().len(), 4);
    assert!(v["residual"].as_f64().unwrap().abs() < 1e-12);
    // sample echoed in input order
    assert_eq!(v["sample"], serde_json::json!([1.0, -1.0, 1.0]));

    let o = bagvm(&["superset", "--stat", "max", "--dist", &fx.f2, "--sample", "1,-1,0"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["per_order"].as_array().unwrap().len(), 4);
}

#[test]
fn mc_json_and_determinism() {
    let fx = fixture();
    let args = ["mc", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2", "-B", "5000", "--seed", "9"];
    let a = bagvm(&args);
    let b = bagvm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["replicates"], 5000);
    assert_eq!(v["seed"], 9);
    let (est, se) = (v["estimate"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((est - 0.25).abs() <= 4.0 * se);

    let c = bagvm(&["bag", "--stat", "threshold_mean:c=0", "--dist", &fx.f2, "-M", "2", "--mc", "5000", "--seed", "9"]);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn output_file() {
    let fx = fixture();
    let out = fx.dir.join("out.txt");
    let o = bagvm(&["bag", "--dist", &fx.f2, "-M", "3", "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(out).unwrap(), "0\n");
}

#[test]
fn verify_passes() {
    let o = bagvm(&["verify", "--all", "-Mmax", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().filter(|l| l.starts_with("PASS")).count() >= 20);
    assert!(!out.contains("FAIL"));
}

#[test]
fn exit_codes() {
    let fx = fixture();
    let bad = write(&fx.dir, "bad.json", r#"{"points":[1,2],"weights":[0.9,0.9]}"#);
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["bag", "--stat", "bogus", "--dist", &fx.f2, "-M", "2"], 2),
        (vec!["bag", "--dist", "/nonexistent.json", "-M", "2"], 2),
        (vec!["bag", "--dist", bad.to_str().unwrap(), "-M", "2"], 2),
        (vec!["bag", "--dist", &fx.f2], 2),
        (vec!["frobnicate"], 2),
        (vec!["influence", "--dist", &fx.f2, "-M", "2", "-k", "2", "--points", "0"], 2),
        (vec!["anova", "--dist", &fx.f2, "-M", "3", "--sample", "1,1"], 2),
        (vec!["bag", "--dist", &fx.f2, "-M", "30", "--budget", "10"], 3),
        (vec!["superset", "--dist", &fx.f2, "--sample", "1,1,1,1,1,1,1"], 2),
    ];
    for (args, code) in cases {
        let o = bagvm(&args);
        assert_eq!(o.status.code(), Some(code), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn byte_identical_reruns() {
    let fx = fixture();
    let args = ["anova", "--stat", "trimmed_mean:gamma=0.2", "--dist", &fx.f2, "--sample", "-1,1,1,-1"];
    assert_eq!(bagvm(&args).stdout, bagvm(&args).stdout);
}
