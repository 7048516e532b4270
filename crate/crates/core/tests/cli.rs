use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sil"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn clarkson_at_two_is_the_parallelogram_law() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = sil(&["verify", "--suite", "clarkson", "--p", "2", "--seed", "7", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let json = read_json(&report);
    for c in json["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "pass");
        assert!(c["value"].as_f64().unwrap().abs() <= 1e-12);
    }
    assert!(json["details"]["max_slack"].as_f64().unwrap().abs() <= 1e-12);
    assert!(json["details"]["min_slack"].as_f64().unwrap().abs() <= 1e-12);
}

#[test]
fn reports_are_byte_identical_for_equal_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let path = dir.path().join(name);
        let out = sil(&["verify", "--suite", "norm-calculus", "--seed", seed, "--report", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stdout(&out));
        fs::read(path).unwrap()
    };
    let a = run("a.json", "11");
    let b = run("b.json", "11");
    let c = run("c.json", "12");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn examples_report_the_published_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let out = sil(&["verify", "--suite", "examples", "--p", "2", "--h", "1e-4", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let json = read_json(&report);
    let norm_sq = json["details"]["norm_sq_T1"].as_f64().unwrap();
    let omega1 = json["details"]["omega1_measure"].as_f64().unwrap();
    assert!((norm_sq - 23.66).abs() <= 0.05, "{norm_sq}");
    assert!((omega1 - 0.118).abs() <= 0.001, "{omega1}");
    assert!(json["checks"].as_array().unwrap().iter().all(|c| c["tag"].is_string()));
}

#[test]
fn congruence_suite_on_a_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("example_5_4.json");
    fs::write(&spec, r#"{"builtin": "example_5_4"}"#).unwrap();
    let report = dir.path().join("r.json");
    let out = sil(&[
        "verify",
        "--suite",
        "congruence",
        "--spec",
        spec.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let json = read_json(&report);
    assert_eq!(json["details"]["components"], 2);
    assert_eq!(json["details"]["pipeline"]["pairing"].as_array().unwrap().len(), 2);
}

#[test]
fn congruence_suite_fails_on_a_bent_operator() {
    let out = sil(&["verify", "--suite", "congruence", "--spec", r#"{"builtin": "example_4_8"}"#, "--h", "1e-3"]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
}

#[test]
fn config_errors_exit_with_two() {
    assert_eq!(code(&sil(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&sil(&["verify", "--suite", "clarkson", "--h=-1"])), 2);
    assert_eq!(code(&sil(&["verify", "--suite", "plaplace", "--p", "1"])), 2);
    assert_eq!(code(&sil(&["verify", "--suite", "congruence", "--spec", "/no/such/file.json"])), 2);
    assert_eq!(code(&sil(&["bogus"])), 2);
}

#[test]
fn reconstruct_identity() {
    let dir = tempfile::tempdir().unwrap();
    let out = sil(&[
        "reconstruct",
        "--spec",
        r#"{"builtin": "identity"}"#,
        "--domain",
        r#"{"builtin": "unit_square", "h": 0.05}"#,
        "--p",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let fit = read_json(&dir.path().join("fit.json"));
    assert!(fit["identity_deviation"].as_f64().unwrap() <= 1e-10);
    assert_eq!(fit["rigid"], true);
    let g = fs::read_to_string(dir.path().join("g_hat.csv")).unwrap();
    assert!(g.starts_with("i,j,x,y,value\n"));
    assert_eq!(g.lines().count(), 401);
    assert!(dir.path().join("xi_hat.csv").is_file());
}

#[test]
fn reconstruct_example_4_8_is_non_rigid() {
    let dir = tempfile::tempdir().unwrap();
    let out = sil(&["reconstruct", "--spec", r#"{"builtin": "example_4_8", "h": 0.001}"#, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("non-rigid"));
    let fit = read_json(&dir.path().join("fit.json"));
    assert_eq!(fit["rigid"], false);
    let bound = 1.0 - (1.0 / 2f64.sinh()).powi(2);
    assert!(fit["fit"]["orthogonality_defect"].as_f64().unwrap() >= bound - 1e-3);
}

const ROTATION: &str = r#"{"rigid": [{"Q": [[0.8, -0.6], [0.6, 0.8]], "b": [0.2, -0.1], "sign": 1, "component": 0}],
    "target": {"h": 0.02, "boxes": [{"lo": [0, 0], "hi": [1, 1]}]},
    "source": {"h": 0.02, "boxes": [{"lo": [-1, -1], "hi": [2, 2]}]}}"#;

#[test]
fn reconstruct_rotation_recovers_the_angle() {
    let dir = tempfile::tempdir().unwrap();
    let out = sil(&["reconstruct", "--spec", ROTATION, "--p", "3", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let fit = read_json(&dir.path().join("fit.json"));
    let angle = fit["angles"][0].as_f64().unwrap();
    assert!((angle - 0.6f64.atan2(0.8)).abs() <= 1e-6, "{angle}");
}

#[test]
fn reconstruct_tabulated_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let h = 0.02;
    let theta: f64 = 0.4;
    let mut g = String::from("i,j,x,y,value\n");
    let mut xi = String::from("i,j,x,y,value_0,value_1\n");
    for i in 0..50 {
        for j in 0..50 {
            let (x, y) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
            let (c, s) = (theta.cos(), theta.sin());
            g.push_str(&format!("{i},{j},{x},{y},-1\n"));
            xi.push_str(&format!("{i},{j},{x},{y},{},{}\n", c * x - s * y, s * x + c * y));
        }
    }
    fs::write(dir.path().join("g.csv"), g).unwrap();
    fs::write(dir.path().join("xi.csv"), xi).unwrap();
    let spec = dir.path().join("op.json");
    fs::write(
        &spec,
        r#"{"tabulated": {"g": "g.csv", "xi": "xi.csv"},
            "target": {"h": 0.02, "boxes": [{"lo": [0, 0], "hi": [1, 1]}]},
            "source": {"h": 0.02, "boxes": [{"lo": [-1, 0], "hi": [1, 2]}]}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = sil(&["reconstruct", "--spec", spec.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let fit = read_json(&out_dir.join("fit.json"));
    assert!((fit["angles"][0].as_f64().unwrap() - theta).abs() <= 2.0 * h);
    assert_eq!(fit["fit"]["components"][0]["motion"]["sign"], -1);
}

#[test]
fn reconstruct_with_a_large_zero_set_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut g = String::from("i,x,value\n");
    let mut xi = String::from("i,x,value_0\n");
    for i in 0..100 {
        let x = (i as f64 + 0.5) * 0.01;
        let w = if i % 10 == 0 { 0.0 } else { 1.0 };
        g.push_str(&format!("{i},{x},{w}\n"));
        xi.push_str(&format!("{i},{x},{x}\n"));
    }
    fs::write(dir.path().join("g.csv"), g).unwrap();
    fs::write(dir.path().join("xi.csv"), xi).unwrap();
    let spec = dir.path().join("op.json");
    fs::write(&spec, r#"{"tabulated": {"g": "g.csv", "xi": "xi.csv"}, "target": {"builtin": "unit_interval", "h": 0.01}}"#).unwrap();
    let out = sil(&["reconstruct", "--spec", spec.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    let fit = read_json(&dir.path().join("o/fit.json"));
    assert_eq!(fit["zero_set_cells"], 10);
}

#[test]
fn reconstruct_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = sil(&["reconstruct", "--spec", "{not json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

const SQUARE: &str = r#"{"h": 0.01, "boxes": [{"lo": [0, 0], "hi": [1, 1]}]}"#;

#[test]
fn congruence_same_box() {
    let out = sil(&["congruence", "--domain1", SQUARE, "--domain2", SQUARE]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("symmetric difference 0e0"), "{}", stdout(&out));
}

#[test]
fn congruence_square_against_tall_box() {
    let tall = r#"{"h": 0.01, "boxes": [{"lo": [0, 0], "hi": [1, 2]}]}"#;
    let out = sil(&["congruence", "--domain1", SQUARE, "--domain2", tall]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    let defect: f64 = text.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert!((defect - 1.0).abs() < 1e-9, "{text}");
}

#[test]
fn congruence_square_under_quarter_turn() {
    let centered = r#"{"h": 0.01, "boxes": [{"lo": [-0.5, -0.5], "hi": [0.5, 0.5]}]}"#;
    let turn = r#"{"Q": [[0, -1], [1, 0]], "b": [0, 0]}"#;
    let out = sil(&["congruence", "--domain1", centered, "--domain2", centered, "--motion", turn]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn congruence_parse_failure() {
    assert_eq!(code(&sil(&["congruence", "--domain1", "{", "--domain2", SQUARE])), 2);
    assert_eq!(
        code(&sil(&["congruence", "--domain1", SQUARE, "--domain2", SQUARE, "--motion", r#"{"Q": [[2]], "b": [0]}"#])),
        2
    );
}
