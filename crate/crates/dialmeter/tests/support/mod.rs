#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dialmeter::report::ReportFile;

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("dialmeter").chain(args.iter().copied());
    let code = dialmeter::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hand10")
}

fn fraction(v: &serde_json::Value) -> f64 {
    let s = v.as_str().expect("fractions are strings");
    match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

/// Compares a report with the hand-computed values in `expected.json`.
/// Returns a description of the first mismatch.
pub fn check_against_fixture(report: &ReportFile) -> Result<(), String> {
    let text = std::fs::read_to_string(fixture_dir().join("expected.json")).unwrap();
    let exp: serde_json::Value = serde_json::from_str(&text).unwrap();
    let close = |name: &str, got: f64, want: f64| {
        if (got - want).abs() <= 1e-12 * want.abs().max(1.0) {
            Ok(())
        } else {
            Err(format!("{name}: got {got}, expected {want}"))
        }
    };
    if report.n as u64 != exp["n"].as_u64().unwrap() {
        return Err(format!("n: got {}", report.n));
    }
    close("mrr", report.mrr, fraction(&exp["mrr"]))?;
    close("drr", report.drr, fraction(&exp["drr"]))?;
    close("mae", report.mae, fraction(&exp["mae"]))?;
    for (k, v) in exp["tolerant_mrr"].as_object().unwrap() {
        let got = report
            .tolerant_mrr
            .get(&k.parse::<u64>().unwrap())
            .ok_or(format!("tolerant_mrr.{k} missing"))?;
        close(&format!("tolerant_mrr.{k}"), *got, fraction(v))?;
    }
    let pos = exp["position_errors"].as_object().unwrap();
    if pos.len() != report.position_errors.len() {
        return Err("position_errors: wrong key set".into());
    }
    for (k, v) in pos {
        let got = report
            .position_errors
            .get(&k.parse::<usize>().unwrap())
            .ok_or(format!("position_errors.{k} missing"))?;
        close(&format!("position_errors.{k}"), *got, fraction(v))?;
    }
    for (k, v) in exp["magnitude_histogram"].as_object().unwrap() {
        let bucket = dialmeter_core::metrics::ErrorBucket::from_label(k).unwrap();
        let got = report.magnitude_histogram[&bucket] as u64;
        if got != v.as_u64().unwrap() {
            return Err(format!("magnitude_histogram.{k}: got {got}"));
        }
    }
    if report.unequal_length_count as u64 != exp["unequal_length_count"].as_u64().unwrap() {
        return Err("unequal_length_count".into());
    }
    Ok(())
}
