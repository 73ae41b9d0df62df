use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn model(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, json).unwrap();
    path
}

fn consips(model: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_consips"));
    cmd.env_remove("CONSIPS_MODEL").env_remove("CONSIPS_OUT").env_remove("CONSIPS_TOL");
    if let Some(m) = model {
        cmd.arg("--model").arg(m);
    }
    cmd.args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// CSV body without the provenance line, as rows of fields.
fn rows(o: &Output) -> Vec<Vec<String>> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# consips "), "{text}");
    let body = lines.collect::<Vec<_>>().join("\n");
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

const SEP3: &str = r#"{"N": 3, "theta": -1, "reservoirs": {"left": {"c": 1, "rho": 0.2}, "right": {"c": 1, "rho": 0.9}}, "absorbing": "boundary-copy"}"#;
const IRW3: &str = r#"{"N": 3, "theta": 0, "reservoirs": {"left": {"c": 1, "rho": 1}, "right": {"c": 1, "rho": 2}}, "absorbing": "boundary-copy"}"#;
const SIP2: &str = r#"{"N": 3, "theta": 2, "absorbing": "boundary-copy"}"#;

#[test]
fn exact_absorption_tables() {
    let dir = TempDir::new().unwrap();
    let sep = model(&dir, "sep.json", SEP3);
    let o = consips(Some(&sep), &["absorb", "--start", "1,2", "--exact"]);
    assert!(o.status.success());
    assert_eq!(rows(&o), vec![vec!["2", "0", "1/3"], vec!["1", "1", "7/12"], vec!["0", "2", "1/12"]]);

    let sip = model(&dir, "sip.json", SIP2);
    let o = consips(Some(&sip), &["genfun", "--start", "1,2", "--exact", "--verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let q: Vec<String> = rows(&o).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(q, ["1/6", "5/12", "5/12"]);

    let irw = model(&dir, "irw.json", IRW3);
    let o = consips(Some(&irw), &["genfun", "--start", "2"]);
    for r in rows(&o) {
        assert!((r[1].parse::<f64>().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = model(&dir, "sip1.json", r#"{"N": 3, "theta": 1}"#);
    let o = consips(Some(&good), &["check"]);
    assert_eq!(o.status.code(), Some(0));
    for r in rows(&o) {
        assert!(r[3].parse::<f64>().unwrap() <= 1e-12);
    }

    let bad = model(
        &dir,
        "perturbed.json",
        r#"{"N": 3, "theta": 1, "perturb": [{"from": 1, "to": 2, "kappa": 2, "m": 0, "delta": 0.5}]}"#,
    );
    let o = consips(Some(&bad), &["check"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("edge (1,2)") && err.contains("κ=2, m=0"), "{err}");

    let malformed = model(&dir, "bad.json", r#"{"N": 3,"#);
    let o = consips(Some(&malformed), &["check"]);
    assert_eq!(o.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn unreachable_absorption_exits_3() {
    let dir = TempDir::new().unwrap();
    let m = model(&dir, "m.json", r#"{"N": 2, "theta": 0, "p": [], "absorbing": [[1, 0, 1.0]]}"#);
    assert_eq!(consips(Some(&m), &["absorb", "--start", "2"]).status.code(), Some(3));
}

#[test]
fn ness_methods_agree() {
    let dir = TempDir::new().unwrap();
    let irw = model(&dir, "irw.json", IRW3);
    let o = consips(Some(&irw), &["ness"]);
    for r in rows(&o).iter().filter(|r| r[0] == "mean") {
        let x: f64 = r[1].parse().unwrap();
        assert!((r[3].parse::<f64>().unwrap() - (1.0 + x / 4.0)).abs() < 1e-12);
    }

    let sep = model(&dir, "sep.json", SEP3);
    let o = consips(Some(&sep), &["ness", "--method", "exact"]);
    assert!(o.status.success());
    for r in rows(&o) {
        if r[0] == "covariance" {
            assert!(r[3].parse::<f64>().unwrap() <= 0.0);
        }
        if !r[6].is_empty() {
            assert!(r[6].parse::<f64>().unwrap().abs() < 1e-10, "{r:?}");
        }
    }

    let sip1 = model(&dir, "sip1.json", r#"{"N": 2, "theta": 1, "reservoirs": {"left": {"c": 1, "rho": 1}, "right": {"c": 1, "rho": 3}}}"#);
    let o = consips(Some(&sip1), &["ness", "--method", "exact", "--truncation", "4"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn outputs_are_reproducible_and_env_overrides_apply() {
    let dir = TempDir::new().unwrap();
    let sip = model(&dir, "sip.json", SIP2);
    let out = dir.path().join("out");
    let run = || {
        let o = Command::new(env!("CARGO_BIN_EXE_consips"))
            .env("CONSIPS_MODEL", &sip)
            .env("CONSIPS_OUT", &out)
            .env("CONSIPS_SEED", "11")
            .args(["simulate", "--start", "1,2", "--replicas", "5000"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("simulate.csv")).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert!(a.starts_with("# consips ") && a.contains("seed=11") && a.contains("model=sha256:"));
    assert_eq!(a.lines().nth(1), Some("state,count,frequency"));
}

#[test]
fn accept_filter_and_tolerance_override() {
    let o = consips(None, &["accept", "--filter", "sip2", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["criterion"], 4);

    let o = consips(None, &["accept", "--filter", "4", "--tol", "1e-20", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["rows"][0]["passed"], false);
    assert_eq!(doc["rows"][0]["tolerance_induced"], true);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("FAIL criterion 4"));
}
