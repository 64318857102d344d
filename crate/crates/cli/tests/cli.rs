use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn qdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdkit"))
        .args(args)
        .output()
        .expect("qdkit runs")
}

fn input(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "inputs", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr));
    })
}

#[test]
fn analyze_arcsine() {
    let out = qdkit(&["analyze", &input("example_arcsine.json"), "--atoms", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    for key in ["strebel", "gradient", "positive"] {
        assert_eq!(r["verdict"][key], Value::Bool(true), "{key}");
    }
    assert_eq!(r["measures"]["real_measures"].as_array().unwrap().len(), 1);
    assert!(r["tolerances"]["branch_equation"].as_f64().is_some());
}

#[test]
fn analyze_is_byte_identical() {
    let a = qdkit(&["analyze", &input("loop_support.json"), "--atoms", "1000"]);
    let b = qdkit(&["analyze", &input("loop_support.json"), "--atoms", "1000"]);
    assert_eq!(a.status.code(), b.status.code());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn abstract_loop_has_no_potentials() {
    let out = qdkit(&["analyze", &input("abstract_loop_reeb.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["verdict"]["gradient"], Value::Bool(false));
    assert_eq!(r["verdict"]["potentials"]["with_leaf_bits"], 0);
}

#[test]
fn report_graphs_reenter_as_abstract_input() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = qdkit(&["analyze", &input("loop_support.json"), "--atoms", "1000", "-o", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let again = json(&qdkit(&["classify", report.to_str().unwrap()]));
    for key in ["non_chaotic", "strebel", "gradient", "positive"] {
        let a = if key == "non_chaotic" { &first["verdict"][key]["value"] } else { &first["verdict"][key] };
        let b = if key == "non_chaotic" { &again["verdict"][key]["value"] } else { &again["verdict"][key] };
        assert_eq!(a, b, "{key}");
    }
}

#[test]
fn hs_solve_chebyshev() {
    let out = qdkit(&["hs-solve", "--P", "z^2-1", "--Q", "z", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let sols = r["solutions"].as_array().unwrap();
    assert_eq!(sols.len(), 1);
    assert!(sols[0]["residual"].as_f64().unwrap() < 1e-10);
    let v = &sols[0]["v_coeffs"][0];
    assert!((v[0].as_f64().unwrap() + 4.0).abs() < 1e-10);
    let mut roots: Vec<f64> = sols[0]["s_roots"]
        .as_array()
        .unwrap()
        .iter()
        .map(|z| z[0].as_f64().unwrap())
        .collect();
    roots.sort_by(f64::total_cmp);
    let a = 0.5f64.sqrt();
    assert!((roots[0] + a).abs() < 1e-10 && (roots[1] - a).abs() < 1e-10);
}

#[test]
fn hs_seed_is_reproducible() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_qdkit"))
            .args(["hs-solve", "--P", "z^3 - z", "--Q", "1.5 z^2 - 0.5", "--n", "3", "--enumerate"])
            .env("QD_SEED", seed)
            .output()
            .unwrap()
    };
    let (a, b) = (run("7"), run("7"));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 7);
}

#[test]
fn hs_compare_chebyshev_chain() {
    let out = qdkit(&[
        "hs-compare", "--P", "z^2-1", "--Q", "z", "--n0", "2", "--n1", "12", "--atoms", "500",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    let cmp = &r["heine_stieltjes"]["comparison"];
    assert!(cmp["final_residual"].as_f64().unwrap() < 5e-2);
    let last = cmp["entries"].as_array().unwrap().last().unwrap().clone();
    assert!(last["support_distance"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["verdict"]["strebel"], Value::Bool(true));
}

#[test]
fn svg_signs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.svg");
    let out = qdkit(&["analyze", &input("example_arcsine.json"), "--atoms", "500", "--svg", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let svg = std::fs::read_to_string(&path).unwrap();
    assert_eq!(svg.matches(r#"class="edge positive" data-edge"#).count(), 1);
    assert_eq!(svg.matches("data-mass=\"-").count(), 1);
    assert!(svg.contains(r#"id="legend""#));

    let reversed = qdkit(&["emit-svg", &input("example_arcsine.json"), "--atoms", "500", "--orientation", "0"]);
    let svg = String::from_utf8(reversed.stdout).unwrap();
    assert!(svg.matches(r#"class="edge negative" data-edge"#).count() >= 1);
}

#[test]
fn svg_of_constant_differential_has_only_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("dz2.json");
    std::fs::write(&doc, r#"{"numerator": [1], "denominator": [1]}"#).unwrap();
    let out = qdkit(&["emit-svg", doc.to_str().unwrap()]);
    let svg = String::from_utf8(out.stdout).unwrap();
    assert!(svg.contains(r#"class="grid""#));
    assert!(!svg.contains("data-edge"));
}

#[test]
fn config_document_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"atoms": 321, "green_check": false}"#).unwrap();
    let out = qdkit(&[
        "measure",
        &input("example_arcsine.json"),
        "--atoms",
        "999",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    let r = json(&out);
    assert_eq!(r["measures"]["atoms"], 321);
    assert!(r["measures"]["green"].as_array().unwrap().is_empty());
}

#[test]
fn errors_exit_one_with_stage() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("bad.json");
    std::fs::write(&doc, r#"{"numerator": [0], "denominator": [1]}"#).unwrap();
    let out = qdkit(&["analyze", doc.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["error"]["stage"].as_str().is_some());
    let missing = qdkit(&["analyze", "/nonexistent.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
}
