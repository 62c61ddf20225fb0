//! Independent reference implementations used only by the tests.

#![allow(dead_code)]

use std::cmp::Ordering;

use dialmeter_core::correction::{correct_sequence, CalibrationGrid, CalibrationSample};
use dialmeter_core::geometry::iou;
use dialmeter_core::metrics::DetectionScene;
use dialmeter_core::{CorrectionThresholds, Digit, Error};

/// Textbook recursive edit distance. Exponential; tiny inputs only.
pub fn lev_recursive(a: &[u8], b: &[u8]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                lev_recursive(ra, rb)
            } else {
                1 + lev_recursive(ra, b)
                    .min(lev_recursive(a, rb))
                    .min(lev_recursive(ra, rb))
            }
        }
    }
}

/// Full-matrix Wagner–Fischer, kept separate from the library's two-row DP.
pub fn lev_matrix(a: &[u8], b: &[u8]) -> usize {
    let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in m.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in m[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = m[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            m[i][j] = sub.min(m[i - 1][j] + 1).min(m[i][j - 1] + 1);
        }
    }
    m[a.len()][b.len()]
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

struct PointResult {
    point: [f64; 4],
    matches: usize,
    /// Σ lev_i / len_i scaled by the common denominator.
    edits_scaled: u64,
    abs_error: u128,
}

/// Naive calibration: every grid point is scored from scratch with string
/// predictions, all results are collected, and the winner is picked by
/// sorting with the full tie-break order.
pub fn oracle_calibrate(
    samples: &[CalibrationSample],
    grid: &CalibrationGrid,
) -> Result<CorrectionThresholds, Error> {
    if samples.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    let denom = samples
        .iter()
        .map(|s| s.truth.len().max(s.values.len()) as u64)
        .fold(1u64, |acc, n| acc / gcd(acc, n) * n);
    let mut results = Vec::new();
    for &a in &grid.cur_frac_min {
        for &b in &grid.next_val_max {
            for &c in &grid.cur_frac_max {
                for &d in &grid.next_val_min {
                    let t = CorrectionThresholds::new(a, b, c, d)?;
                    let mut r = PointResult {
                        point: [a, b, c, d],
                        matches: 0,
                        edits_scaled: 0,
                        abs_error: 0,
                    };
                    for s in samples {
                        let pred: String = correct_sequence(&s.values, &t)
                            .iter()
                            .map(|d| char::from(b'0' + d.get()))
                            .collect();
                        if pred == s.truth {
                            r.matches += 1;
                        }
                        let longest = pred.len().max(s.truth.len()) as u64;
                        r.edits_scaled +=
                            lev_matrix(pred.as_bytes(), s.truth.as_bytes()) as u64 * (denom / longest);
                        let p: u128 = pred.parse().unwrap();
                        let g: u128 = s.truth.parse().unwrap();
                        r.abs_error += p.abs_diff(g);
                    }
                    results.push(r);
                }
            }
        }
    }
    results.sort_by(|x, y| {
        y.matches
            .cmp(&x.matches)
            .then(x.edits_scaled.cmp(&y.edits_scaled))
            .then(x.abs_error.cmp(&y.abs_error))
            .then_with(|| {
                x.point
                    .iter()
                    .zip(&y.point)
                    .map(|(p, q)| p.partial_cmp(q).unwrap())
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
    });
    let p = results[0].point;
    CorrectionThresholds::new(p[0], p[1], p[2], p[3])
}

/// Average precision by direct enumeration: for every cutoff k the top-k
/// detections are matched from scratch, and the interpolated precision at
/// each recall level is the best precision at any cutoff reaching it.
pub fn brute_ap(scenes: &[DetectionScene], class: Digit, threshold: f64) -> Option<f64> {
    let n_gt = scenes
        .iter()
        .flat_map(|s| &s.ground_truth)
        .filter(|g| g.class == class)
        .count();
    if n_gt == 0 {
        return None;
    }
    let mut dets: Vec<(usize, usize)> = Vec::new();
    for (si, s) in scenes.iter().enumerate() {
        for (pi, p) in s.predictions.iter().enumerate() {
            if p.class == class {
                dets.push((si, pi));
            }
        }
    }
    // Insertion sort, descending confidence, stable.
    for i in 1..dets.len() {
        let mut j = i;
        while j > 0 {
            let (sa, pa) = dets[j - 1];
            let (sb, pb) = dets[j];
            if scenes[sa].predictions[pa].confidence < scenes[sb].predictions[pb].confidence {
                dets.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    let mut points: Vec<(f64, f64)> = Vec::new();
    for k in 1..=dets.len() {
        let mut used: Vec<Vec<bool>> = scenes.iter().map(|s| vec![false; s.ground_truth.len()]).collect();
        let mut tp = 0usize;
        for &(si, pi) in &dets[..k] {
            let det = &scenes[si].predictions[pi];
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in scenes[si].ground_truth.iter().enumerate() {
                if g.class != class || used[si][gi] {
                    continue;
                }
                let o = iou(&det.bbox, &g.bbox);
                if best.is_none_or(|(_, b)| o > b) {
                    best = Some((gi, o));
                }
            }
            if let Some((gi, o)) = best {
                if o >= threshold {
                    used[si][gi] = true;
                    tp += 1;
                }
            }
        }
        points.push((tp as f64 / n_gt as f64, tp as f64 / k as f64));
    }
    let mut levels: Vec<f64> = points.iter().map(|p| p.0).filter(|&r| r > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut ap = 0.0;
    let mut prev = 0.0;
    for r in levels {
        let best = points
            .iter()
            .filter(|p| p.0 >= r)
            .map(|p| p.1)
            .fold(0.0, f64::max);
        ap += (r - prev) * best;
        prev = r;
    }
    Some(ap)
}

/// Kolmogorov–Smirnov statistic of `xs` against Uniform(0, 1).
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

/// Critical KS distance for large `n` at significance level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt() / (n as f64).sqrt()
}
