use std::fs;

use dialmeter::formats::{
    detection_line, ground_truth_line, parse_detection_line, parse_detections,
    parse_ground_truth, parse_ground_truth_line,
};
use dialmeter::FormatError;
use dialmeter_core::pipeline::DialPayload;
use dialmeter_core::simulator::{generate_batch, BatchConfig, PayloadKind};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn valid_lines() -> Vec<String> {
    let mut lines = Vec::new();
    for payload in [PayloadKind::ClassScores, PayloadKind::Value, PayloadKind::SinCos, PayloadKind::Paired] {
        let config = BatchConfig {
            payload,
            tilt_max: 10.0,
            angle_sigma: 1.0,
            seed: 1,
            ..BatchConfig::default()
        };
        for s in generate_batch(&config, 5).unwrap() {
            lines.push(detection_line(&s.observation));
        }
    }
    lines
}

#[test]
fn truncated_json_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let lines = valid_lines();
    let text = format!("{}\n{}\n{}\n", lines[0], lines[1], &lines[2][..lines[2].len() / 2]);
    fs::write(&path, text).unwrap();
    match parse_detections(&path) {
        Err(FormatError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn duplicate_ids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    let lines = valid_lines();
    fs::write(&path, format!("{}\n\n{}\n", lines[0], lines[0])).unwrap();
    match parse_detections(&path) {
        Err(FormatError::Validation { line, field, .. }) => {
            assert_eq!(line, 3);
            assert_eq!(field, "image_id");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn ground_truth_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.jsonl");
    fs::write(
        &path,
        "{\"image_id\":\"a\",\"reading\":\"04189\"}\n{\"image_id\":\"b\",\"reading\":\"1234\",\"dials\":[]}\n",
    )
    .unwrap();
    let gt = parse_ground_truth(&path).unwrap();
    assert_eq!(gt.len(), 2);
    assert_eq!(gt[0].reading, "04189");
    assert!(gt[0].dials.is_empty());
    fs::write(&path, "{\"image_id\":\"a\",\"reading\":\"04A89\"}\n").unwrap();
    assert!(matches!(parse_ground_truth(&path), Err(FormatError::Validation { line: 1, .. })));
}

fn mutate(rng: &mut StdRng, line: &str) -> String {
    let mut bytes = line.as_bytes().to_vec();
    match rng.random_range(0..6) {
        0 => {
            let i = rng.random_range(0..bytes.len());
            bytes[i] = b"0123456789-.,:{}[]\"ex "[rng.random_range(0..22)];
        }
        1 => {
            let i = rng.random_range(0..bytes.len());
            bytes.remove(i);
        }
        2 => {
            let i = rng.random_range(0..=bytes.len());
            bytes.insert(i, b"0-.9e\""[rng.random_range(0..6)]);
        }
        3 => {
            let cut = rng.random_range(0..bytes.len());
            bytes.truncate(cut);
        }
        4 => {
            // Swap one number for an out-of-range one.
            let nums = ["0.0", "-1.0", "1e308", "10.0", "-0.5", "2.0"];
            let s = String::from_utf8(bytes.clone()).unwrap();
            let starts: Vec<usize> = s
                .match_indices(|c: char| c.is_ascii_digit())
                .map(|(i, _)| i)
                .filter(|&i| i == 0 || !s.as_bytes()[i - 1].is_ascii_digit() && s.as_bytes()[i - 1] != b'.')
                .collect();
            if let Some(&start) = starts.get(rng.random_range(0..starts.len().max(1))) {
                let end = s[start..]
                    .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == '-'))
                    .map_or(s.len(), |e| start + e);
                let mut t = s[..start].to_string();
                t.push_str(nums[rng.random_range(0..nums.len())]);
                t.push_str(&s[end..]);
                bytes = t.into_bytes();
            }
        }
        _ => {
            let s = String::from_utf8(bytes.clone()).unwrap();
            let swaps = [("sincos", "value"), ("value", "class_scores"), ("class_scores", "sincos"), ("confidence", "conf")];
            let (a, b) = swaps[rng.random_range(0..swaps.len())];
            bytes = s.replacen(a, b, 1).into_bytes();
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

#[test]
fn fuzzed_lines_parse_faithfully_or_fail_located() {
    let mut rng = StdRng::seed_from_u64(99);
    let lines = valid_lines();
    let (mut accepted, mut rejected) = (0, 0);
    for n in 0..1000 {
        let line_no = n + 1;
        let text = mutate(&mut rng, &lines[n % lines.len()]);
        match parse_detection_line(&text, line_no) {
            Ok(parsed) => {
                accepted += 1;
                let obs = &parsed.observation;
                assert!(obs.width > 0.0 && obs.height > 0.0, "{text}");
                for d in &obs.dials {
                    assert!(d.bbox.w > 0.0 && d.bbox.h > 0.0, "{text}");
                    assert!(d.bbox.is_within(obs.width, obs.height), "{text}");
                    assert!((0.0..=1.0).contains(&d.confidence), "{text}");
                    if let DialPayload::ClassScores(s) = d.payload {
                        assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-6, "{text}");
                    }
                }
                let again = parse_detection_line(&detection_line(obs), line_no).unwrap();
                assert_eq!(&again.observation, obs, "{text}");
            }
            Err(e) => {
                rejected += 1;
                assert_eq!(e.line(), Some(line_no), "{text}: {e}");
            }
        }
    }
    assert!(accepted > 0 && rejected > 0, "{accepted} {rejected}");
}

#[test]
fn fuzzed_ground_truth_lines() {
    let mut rng = StdRng::seed_from_u64(7);
    let config = BatchConfig { seed: 2, ..BatchConfig::default() };
    let lines: Vec<String> = generate_batch(&config, 10)
        .unwrap()
        .iter()
        .map(|s| {
            ground_truth_line(&dialmeter::formats::GroundTruth {
                image_id: s.observation.image_id.clone(),
                reading: s.gt_reading.clone(),
                dials: s.dial_boxes().into_iter().zip(s.gt_values.iter().copied()).collect(),
                line: 0,
            })
        })
        .collect();
    for n in 0..1000 {
        let text = mutate(&mut rng, &lines[n % lines.len()]);
        match parse_ground_truth_line(&text, n + 1) {
            Ok(gt) => {
                assert!(!gt.reading.is_empty() && gt.reading.bytes().all(|b| b.is_ascii_digit()));
                let again = parse_ground_truth_line(&ground_truth_line(&gt), n + 1).unwrap();
                assert_eq!(again.reading, gt.reading);
                assert_eq!(again.dials, gt.dials);
            }
            Err(e) => assert_eq!(e.line(), Some(n + 1)),
        }
    }
}
