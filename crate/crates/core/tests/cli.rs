use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tmv(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmv")).args(args).current_dir(dir).output().unwrap()
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_config(dir: &Path) {
    let cfg = r#"{"simulation": {"n": 12}, "bootstrap": 3, "sweep_gamma": [0.0, 1.0]}"#;
    std::fs::write(dir.join("study.json"), cfg).unwrap();
}

#[test]
fn simulate_then_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    ok(tmv(&["simulate", "--config", "study.json", "--out", "sim"], d));
    assert!(d.join("sim/curves.csv").exists());
    let truth = read_json(&d.join("sim/truth.json"));
    assert_eq!(truth["thetas"].as_array().unwrap().len(), 12);

    for run in ["a", "b"] {
        ok(tmv(&["report", "--config", "study.json", "--input", "sim/curves.csv", "--out", run], d));
    }
    let mut a = read_json(&d.join("a/report.json"));
    let mut b = read_json(&d.join("b/report.json"));
    for doc in [&mut a, &mut b] {
        doc.as_object_mut().unwrap().remove("generated_at_unix");
    }
    assert_eq!(a, b);
    for key in ["config", "template", "fit", "curves", "decomposition", "bootstrap", "gamma_sweep"] {
        assert!(a.get(key).is_some(), "missing {key}");
    }
    assert_eq!(a["bootstrap"]["B"], 3);
    for file in ["fitted.svg", "fitted.csv", "warped.svg", "warped.csv"] {
        let left = std::fs::read(d.join("a").join(file)).unwrap();
        assert_eq!(left, std::fs::read(d.join("b").join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn subcommands_write_their_documents() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    ok(tmv(&["simulate", "--config", "study.json", "--seed", "5", "--out", "."], d));
    ok(tmv(&["fit", "--input", "curves.csv", "--degree", "4"], d));
    assert_eq!(read_json(&d.join("fit.json"))["template"]["degree"], 4);
    ok(tmv(&["decompose", "--input", "curves.csv", "--gamma", "0.25"], d));
    assert_eq!(read_json(&d.join("decomposition.json"))["decomposition"]["gamma"], 0.25);
    ok(tmv(&["bootstrap", "--input", "curves.csv", "--boot", "2", "--seed", "9"], d));
    let boot = read_json(&d.join("bootstrap.json"));
    assert_eq!(boot["B"], 2);
    assert_eq!(boot["seed"], 9);
}

#[test]
fn report_omits_optional_sections() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("study.json"), r#"{"simulation": {"n": 6}}"#).unwrap();
    ok(tmv(&["simulate", "--config", "study.json"], d));
    ok(tmv(&["report", "--input", "curves.csv", "--out", "r"], d));
    let doc = read_json(&d.join("r/report.json"));
    assert!(doc.get("bootstrap").is_none());
    assert!(doc.get("gamma_sweep").is_none());
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = tmv(&["fit"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input"));

    std::fs::write(d.join("bad.csv"), "curve_id,t,z\na,0,1\na,0,2\n").unwrap();
    let out = tmv(&["fit", "--input", "bad.csv"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}
