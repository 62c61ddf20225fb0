mod support;

use std::fs;

use dialmeter::report::read_report;
use support::{check_against_fixture, fixture_dir, run_cli};

fn simulate(dir: &std::path::Path, tag: &str, seed: &str) -> (Vec<u8>, Vec<u8>) {
    let det = dir.join(format!("{tag}-det.jsonl"));
    let gt = dir.join(format!("{tag}-gt.jsonl"));
    let (code, _, err) = run_cli(&[
        "simulate", "--count", "10", "--seed", seed, "--noise-sigma", "2.0", "--flip-prob", "0.05",
        "--tilt-max", "20", "--boundary-weight", "0.7",
        "--out-detections", det.to_str().unwrap(), "--out-gt", gt.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    (fs::read(det).unwrap(), fs::read(gt).unwrap())
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a", "7");
    let b = simulate(dir.path(), "b", "7");
    assert_eq!(a, b);
    let c = simulate(dir.path(), "c", "8");
    assert_ne!(a.0, c.0);
}

#[test]
fn three_dial_record_names_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("d.jsonl");
    let dial = |x: f64| format!(r#"{{"bbox":[{x},50.0,20.0,20.0],"payload":{{"kind":"value","data":1.5}},"confidence":0.9}}"#);
    fs::write(
        &det,
        format!(
            "{{\"image_id\":\"three-dials\",\"width\":200.0,\"height\":100.0,\"dials\":[{},{},{}]}}\n",
            dial(30.0),
            dial(60.0),
            dial(90.0)
        ),
    )
    .unwrap();
    let out = dir.path().join("p.jsonl");
    let (code, _, err) = run_cli(&["read", "--detections", det.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(err.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["image_id"], "three-dials");
    assert_eq!(v["error"], "validation");
}

#[test]
fn malformed_input_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let det = dir.path().join("d.jsonl");
    fs::write(&det, "\n{\"image_id\":").unwrap();
    let out = dir.path().join("p.jsonl");
    let (code, _, err) = run_cli(&["read", "--detections", det.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "parse");
    assert_eq!(v["line"], 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec![],
        vec!["bogus"],
        vec!["simulate", "--count", "ten"],
        vec!["read", "--detections", "x", "--out", "y", "--mode", "psychic"],
        vec!["evaluate", "--pred", "p"],
    ] {
        let (code, _, err) = run_cli(&args);
        assert_eq!(code, 2, "{args:?}");
        let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(v["error"], "usage");
    }
    let (code, out, _) = run_cli(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("simulate"));
}

#[test]
fn missing_prediction_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("p.jsonl");
    let gt = dir.path().join("g.jsonl");
    fs::write(&pred, "{\"image_id\":\"a\",\"reading\":\"1234\"}\n").unwrap();
    fs::write(&gt, "{\"image_id\":\"a\",\"reading\":\"1234\"}\n{\"image_id\":\"b\",\"reading\":\"1234\"}\n").unwrap();
    let out = dir.path().join("r.json");
    let (code, _, err) = run_cli(&[
        "evaluate", "--pred", pred.to_str().unwrap(), "--gt", gt.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("\"image_id\":\"b\""));
}

#[test]
fn hand_computed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let fx = fixture_dir();
    let (code, _, err) = run_cli(&[
        "evaluate",
        "--pred", fx.join("pred.jsonl").to_str().unwrap(),
        "--gt", fx.join("gt.jsonl").to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    check_against_fixture(&read_report(&out).unwrap()).unwrap();

    let csv = dir.path().join("r.csv");
    let (code, _, _) = run_cli(&[
        "evaluate",
        "--pred", fx.join("pred.jsonl").to_str().unwrap(),
        "--gt", fx.join("gt.jsonl").to_str().unwrap(),
        "--tolerance", "10",
        "--out", csv.to_str().unwrap(),
        "--format", "csv",
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(csv).unwrap();
    assert!(text.lines().any(|l| l == "mrr,0.3"));
    assert!(text.lines().any(|l| l == "tolerant_mrr.10,0.8"));
}

#[test]
fn pipeline_round_trip_with_calibration() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    let run = |args: &[&str]| {
        let (code, _, err) = run_cli(args);
        assert_eq!(code, 0, "{args:?}: {err}");
    };
    run(&["simulate", "--count", "60", "--seed", "3", "--noise-sigma", "3.6", "--boundary-weight", "0.9",
        "--out-detections", &p("d.jsonl"), "--out-gt", &p("g.jsonl")]);
    fs::write(
        p("grid.json"),
        r#"{"cur_frac_min":[0.6,0.8],"next_val_max":[2.0,3.0],"cur_frac_max":[0.2],"next_val_min":[8.0]}"#,
    )
    .unwrap();
    run(&["calibrate", "--detections", &p("d.jsonl"), "--gt", &p("g.jsonl"), "--grid", &p("grid.json"), "--out", &p("t.json")]);
    let t = dialmeter::formats::read_thresholds(dir.path().join("t.json").as_path()).unwrap();
    assert_eq!(t.carry_down().cur_frac_max, 0.2);
    run(&["read", "--detections", &p("d.jsonl"), "--thresholds", &p("t.json"), "--out", &p("p.jsonl")]);
    run(&["evaluate", "--pred", &p("p.jsonl"), "--gt", &p("g.jsonl"), "--tolerance", "0", "--out", &p("r.json")]);
    let report = read_report(dir.path().join("r.json").as_path()).unwrap();
    assert_eq!(report.n, 60);
    assert_eq!(report.tolerant_mrr[&0], report.mrr);
}
