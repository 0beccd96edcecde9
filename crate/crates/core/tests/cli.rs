use std::fs;
use std::process::Command;

use serde_json::Value;

fn wpolar(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wpolar")).args(args).env_remove("WPOLAR_OUTPUT_DIR").output().unwrap()
}

fn write_path(path: &std::path::Path, n: usize, f: impl Fn(f64) -> f64) {
    let mut s = String::from("t,value\n");
    for i in 0..n {
        let t = if i == n - 1 { 1.0 } else { i as f64 / (n - 1) as f64 };
        s += &format!("{t},{}\n", f(t));
    }
    fs::write(path, s).unwrap();
}

fn report(dir: &std::path::Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn verify_endpoint_identity_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = wpolar(&["verify", "--check", "lemma1", "--a", "1", "--sigma", "1", "--n", "200000", "--seed", "7", "--output-dir", d]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path());
    assert_eq!(r["schema_version"], 1);
    let e = &r["entries"][0];
    assert_eq!(e["check_id"], "lemma1");
    assert!((e["target"].as_f64().unwrap() - 0.1494292).abs() < 1e-7);
    assert!(e["z_score"].as_f64().unwrap().abs() <= 3.0);
    for key in ["params", "mean", "std_err", "n", "kappa_selected", "wall_time_s", "seed"] {
        assert!(e.get(key).is_some(), "{key}");
    }
}

#[test]
fn verify_oracles_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = wpolar(&["verify", "--check", "oracles", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert!(r["entries"].as_array().unwrap().iter().all(|e| e["passed"] == true));
}

#[test]
fn same_seed_same_report() {
    let strip = |mut v: Value| {
        for e in v["entries"].as_array_mut().unwrap() {
            e["wall_time_s"] = Value::Null;
        }
        v
    };
    let mut reports = Vec::new();
    for workers in ["1", "3"] {
        let dir = tempfile::tempdir().unwrap();
        let out = wpolar(&[
            "verify", "--check", "j,theorem2", "--n", "20000", "--workers", workers, "--output-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        reports.push(strip(report(dir.path())));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn output_dir_from_env() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wpolar"))
        .args(["verify", "--check", "roundtrips"])
        .env("WPOLAR_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn failing_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // the nominal planar weight disagrees with the complex Wiener side
    let out = wpolar(&["verify", "--check", "theorem4", "--n", "20000", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("report.json").exists());
}

#[test]
fn decompose_constant_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("const.csv");
    write_path(&input, 129, |_| 2.0);
    let d = dir.path().to_str().unwrap();
    let out = wpolar(&["decompose", "--in", input.to_str().unwrap(), "--output-dir", d, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("rho.txt")).unwrap().trim(), "2");
    let phi = fs::read_to_string(dir.path().join("phi.csv")).unwrap();
    for line in phi.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[0] - v[1]).abs() < 1e-15 && v[2] == 0.0);
    }
}

#[test]
fn decompose_reconstruct_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    let f = |t: f64| 1.5 + 0.4 * (6.0 * t).sin();
    write_path(&input, 513, f);
    let d = dir.path().to_str().unwrap();
    assert_eq!(wpolar(&["decompose", "--in", input.to_str().unwrap(), "--output-dir", d, "--format", "csv"]).status.code(), Some(0));
    let rho = fs::read_to_string(dir.path().join("rho.txt")).unwrap();
    let phi = dir.path().join("phi.csv");
    let out = wpolar(&["reconstruct", "--in", phi.to_str().unwrap(), "--rho", rho.trim(), "--output-dir", d, "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let back = fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let err = back
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[1] - f(v[0])).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(wpolar(&["verify", "--check", "lemma1", "--sigma", "-1", "--output-dir", d]).status.code(), Some(2));
    assert_eq!(wpolar(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(wpolar(&["reconstruct", "--in", "/nonexistent.csv", "--rho", "1"]).status.code(), Some(3));
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,value\n0,1\n0.7,1\n1,1\n").unwrap();
    assert_eq!(wpolar(&["decompose", "--in", bad.to_str().unwrap(), "--output-dir", d]).status.code(), Some(3));
    assert_eq!(wpolar(&["--help"]).status.code(), Some(0));
}

#[test]
fn sample_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["brownian", "bridge", "mu", "planar"] {
        let sub = dir.path().join(kind);
        let out = wpolar(&["sample", "--kind", kind, "--count", "3", "--n-points", "65", "--output-dir", sub.to_str().unwrap(), "--format", "csv"]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        assert_eq!(fs::read_dir(&sub).unwrap().count(), 3);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "checks = [\"j\"]\nn_samples = 5000\nseed = 3\nbeta = 0.5\nrho = 2.0\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let out = wpolar(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "4", "--output-dir", d]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    let e = &r["entries"][0];
    assert_eq!(e["check_id"], "j");
    assert_eq!(e["seed"], 4);
    assert_eq!(e["n"], 5000);
    assert_eq!(e["params"]["rho"], 2.0);
}
