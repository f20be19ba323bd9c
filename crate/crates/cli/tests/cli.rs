//! End-to-end runs of the `hillspec` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hillspec"));
    c.env_remove("HILLSPEC_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn error_kinds(out: &Output) -> Vec<String> {
    stdout_json(out)["errors"]
        .as_array()
        .expect("errors array")
        .iter()
        .map(|e| e["kind"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn free_discriminant_is_twice_cosine() {
    let out = bin()
        .args(["discriminant", "--lambda-grid", "0:100:101", "--potential"])
        .arg(config("zero.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,F_re,F_im,Fprime_re,Fprime_im"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 101);
    for r in &rows {
        let s = r[0].sqrt();
        assert!((r[1] - 2.0 * s.cos()).abs() <= 1e-9, "λ={} F={}", r[0], r[1]);
        assert!(r[2].abs() <= 1e-9);
        if r[0] > 0.0 {
            assert!((r[3] + s.sin() / s).abs() <= 1e-8, "λ={} F'={}", r[0], r[3]);
        }
    }
}

#[test]
fn output_file_and_stdout_agree() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    let run = |extra: &[&std::ffi::OsStr]| {
        bin()
            .args(["discriminant", "--lambda-grid", "-3:7:5", "--potential"])
            .arg(config("mathieu.json"))
            .args(extra)
            .output()
            .unwrap()
    };
    let direct = run(&[]);
    let filed = run(&["--out".as_ref(), path.as_os_str()]);
    assert!(direct.status.success() && filed.status.success());
    assert!(filed.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), direct.stdout);
}

#[test]
fn validation_errors_exit_2() {
    let missing = bin()
        .args(["discriminant", "--lambda-grid", "0:1:2", "--potential", "/nonexistent/q.json"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(error_kinds(&missing), ["Io"]);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"fourier": [[1, "x", 0]]}"#).unwrap();
    let malformed = bin()
        .args(["discriminant", "--lambda-grid", "0:1:2", "--potential"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(malformed.status.code(), Some(2));
    assert_eq!(error_kinds(&malformed), ["MalformedConfig"]);

    let wide_h = bin()
        .args(["expand", "--h", "0.5", "--potential"])
        .arg(config("zero.json"))
        .arg("--function")
        .arg(config("bump.json"))
        .output()
        .unwrap();
    assert_eq!(wide_h.status.code(), Some(2));
    assert_eq!(error_kinds(&wide_h), ["InvalidArgument"]);
}

#[test]
fn numerical_errors_exit_3() {
    let out = bin()
        .args(["discriminant", "--lambda-grid", "0:1:2", "--tol", "1e-300", "--potential"])
        .arg(config("mathieu.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kinds(&out), ["ToleranceNotMet"]);
}

#[test]
fn thread_settings_are_validated_and_do_not_change_results() {
    let run = |flag: Option<&str>, env: Option<&str>| {
        let mut c = bin();
        c.args(["bands", "--n-min", "-2", "--n-max", "2", "--t-points", "9", "--potential"])
            .arg(config("complex.json"));
        if let Some(n) = flag {
            c.args(["--threads", n]);
        }
        if let Some(v) = env {
            c.env("HILLSPEC_THREADS", v);
        }
        c.output().unwrap()
    };
    let one = run(Some("1"), None);
    let three = run(None, Some("3"));
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
    let bands = stdout_json(&one)["bands"].as_array().unwrap().len();
    assert_eq!(bands, 5);

    assert_eq!(run(Some("0"), None).status.code(), Some(2));
    let bad_env = run(None, Some("many"));
    assert_eq!(bad_env.status.code(), Some(2));
    assert_eq!(error_kinds(&bad_env), ["InvalidArgument"]);
}

#[test]
fn gasymov_band_edges_are_spectral_singularities() {
    let out = bin()
        .args(["singularities", "--window", "1", "0", "150", "0", "--potential"])
        .arg(config("gasymov.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    let records = v["records"].as_array().unwrap();
    let pi = std::f64::consts::PI;
    for k in 1..=3 {
        let mu = (k as f64 * pi).powi(2);
        let r = records
            .iter()
            .find(|r| (r["mu"][0].as_f64().unwrap() - mu).abs() < 1e-6)
            .unwrap_or_else(|| panic!("no record at ({k}π)²"));
        assert_eq!(r["klass"], "ESS", "{r}");
        assert_eq!(r["m"], 2);
    }
    assert!(v["errors"].as_array().unwrap().is_empty());
}

#[test]
fn small_expansion_of_a_bump() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let out = bin()
        .args(["expand", "--n-max", "6", "--m", "1", "--mode", "both", "--potential"])
        .arg(config("zero.json"))
        .arg("--function")
        .arg(config("bump.json"))
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    let reports = v["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("mode,x,f,f_hat_re,f_hat_im\n"));
    assert!(text.lines().any(|l| l.starts_with("contour,")));
    assert!(text.lines().any(|l| l.starts_with("pv,")));
}
