//! Reading and detection metrics.
//!
//! Meter-level: recognition rate (exact string match), dial recognition rate
//! (normalized edit distance), mean absolute error of the readings taken as
//! integers, and recognition rate under an absolute error tolerance. Error
//! analytics: mismatches by dial position and a histogram of error
//! magnitudes. Detection-level: per-class average precision and its mean.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::dial::Digit;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// A predicted reading and its ground truth, both non-empty digit strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadingPair {
    pred: String,
    gt: String,
}

fn is_digit_string(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

impl ReadingPair {
    pub fn new(pred: impl Into<String>, gt: impl Into<String>) -> Result<Self> {
        let pred = pred.into();
        let gt = gt.into();
        if !is_digit_string(&pred) {
            return Err(Error::ParseError(pred));
        }
        if !is_digit_string(&gt) {
            return Err(Error::ParseError(gt));
        }
        Ok(ReadingPair { pred, gt })
    }

    pub fn pred(&self) -> &str {
        &self.pred
    }

    pub fn gt(&self) -> &str {
        &self.gt
    }

    pub fn is_match(&self) -> bool {
        self.pred == self.gt
    }

    /// `|int(pred) - int(gt)|`.
    pub fn abs_error(&self) -> Result<u64> {
        Ok(parse_reading(&self.pred)?.abs_diff(parse_reading(&self.gt)?))
    }
}

fn parse_reading(s: &str) -> Result<u64> {
    if !is_digit_string(s) {
        return Err(Error::ParseError(s.into()));
    }
    s.parse::<u64>().map_err(|_| Error::ParseError(s.into()))
}

fn non_empty(pairs: &[ReadingPair]) -> Result<()> {
    if pairs.is_empty() {
        Err(Error::EmptyEvaluationSet)
    } else {
        Ok(())
    }
}

/// Unit-cost edit distance.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            let cost = if x == y { diag } else { diag + 1 };
            row[j + 1] = cost.min(above + 1).min(row[j] + 1);
            diag = above;
        }
    }
    row[b.len()]
}

pub fn levenshtein_str(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

pub fn mrr(pairs: &[ReadingPair]) -> Result<f64> {
    non_empty(pairs)?;
    let hits = pairs.iter().filter(|p| p.is_match()).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Mean of `1 - lev(pred, gt) / max(|pred|, |gt|)`.
pub fn drr(pairs: &[ReadingPair]) -> Result<f64> {
    non_empty(pairs)?;
    let total: f64 = pairs.iter().map(dial_rate).sum();
    Ok(total / pairs.len() as f64)
}

fn dial_rate(p: &ReadingPair) -> f64 {
    let longest = p.pred.len().max(p.gt.len());
    1.0 - levenshtein(p.pred.as_bytes(), p.gt.as_bytes()) as f64 / longest as f64
}

pub fn mae(pairs: &[ReadingPair]) -> Result<f64> {
    non_empty(pairs)?;
    let mut total: u128 = 0;
    for p in pairs {
        total += p.abs_error()? as u128;
    }
    Ok(total as f64 / pairs.len() as f64)
}

/// Fraction of pairs whose integer error is at most `tolerance`.
pub fn tolerant_mrr(pairs: &[ReadingPair], tolerance: u64) -> Result<f64> {
    non_empty(pairs)?;
    let mut hits = 0usize;
    for p in pairs {
        if p.abs_error()? <= tolerance {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}

/// Share of mismatched digits at each 1-based position, over equal-length
/// pairs only. Empty when no equal-length pair has a mismatch.
pub fn error_position_distribution(pairs: &[ReadingPair]) -> Result<BTreeMap<usize, f64>> {
    non_empty(pairs)?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut total = 0usize;
    for p in pairs.iter().filter(|p| p.pred.len() == p.gt.len()) {
        for (i, (a, b)) in p.pred.bytes().zip(p.gt.bytes()).enumerate() {
            if a != b {
                *counts.entry(i + 1).or_default() += 1;
                total += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(pos, n)| (pos, n as f64 / total as f64))
        .collect())
}

pub fn unequal_length_count(pairs: &[ReadingPair]) -> usize {
    pairs.iter().filter(|p| p.pred.len() != p.gt.len()).count()
}

/// Decimal-decade buckets of the absolute reading error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorBucket {
    One,
    TwoToNine,
    Tens,
    Hundreds,
    ThousandsPlus,
}

impl ErrorBucket {
    pub const ALL: [ErrorBucket; 5] = [
        ErrorBucket::One,
        ErrorBucket::TwoToNine,
        ErrorBucket::Tens,
        ErrorBucket::Hundreds,
        ErrorBucket::ThousandsPlus,
    ];

    /// `None` for a zero error.
    pub fn of(abs_error: u64) -> Option<ErrorBucket> {
        match abs_error {
            0 => None,
            1 => Some(ErrorBucket::One),
            2..=9 => Some(ErrorBucket::TwoToNine),
            10..=99 => Some(ErrorBucket::Tens),
            100..=999 => Some(ErrorBucket::Hundreds),
            _ => Some(ErrorBucket::ThousandsPlus),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorBucket::One => "1",
            ErrorBucket::TwoToNine => "2-9",
            ErrorBucket::Tens => "10-99",
            ErrorBucket::Hundreds => "100-999",
            ErrorBucket::ThousandsPlus => "1000+",
        }
    }

    pub fn from_label(label: &str) -> Option<ErrorBucket> {
        ErrorBucket::ALL.into_iter().find(|b| b.label() == label)
    }
}

impl fmt::Display for ErrorBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Erroneous meters per error bucket. Every bucket is present.
pub fn magnitude_histogram(pairs: &[ReadingPair]) -> Result<BTreeMap<ErrorBucket, usize>> {
    non_empty(pairs)?;
    let mut hist: BTreeMap<ErrorBucket, usize> =
        ErrorBucket::ALL.into_iter().map(|b| (b, 0)).collect();
    for p in pairs {
        if let Some(b) = ErrorBucket::of(p.abs_error()?) {
            *hist.entry(b).or_default() += 1;
        }
    }
    Ok(hist)
}

/// All meter-level metrics for one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_meters: usize,
    pub mrr: f64,
    pub drr: f64,
    pub mae: f64,
    pub tolerant_mrr: BTreeMap<u64, f64>,
    pub position_errors: BTreeMap<usize, f64>,
    pub magnitude_histogram: BTreeMap<ErrorBucket, usize>,
    pub unequal_length_count: usize,
}

impl MetricsReport {
    pub fn compute(pairs: &[ReadingPair], tolerances: &[u64]) -> Result<Self> {
        let mut tolerant = BTreeMap::new();
        for &t in tolerances {
            tolerant.insert(t, tolerant_mrr(pairs, t)?);
        }
        Ok(MetricsReport {
            n_meters: pairs.len(),
            mrr: mrr(pairs)?,
            drr: drr(pairs)?,
            mae: mae(pairs)?,
            tolerant_mrr: tolerant,
            position_errors: error_position_distribution(pairs)?,
            magnitude_histogram: magnitude_histogram(pairs)?,
            unequal_length_count: unequal_length_count(pairs),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub class: Digit,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub bbox: BBox,
    pub class: Digit,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionScene {
    pub image_id: String,
    pub predictions: Vec<ScoredBox>,
    pub ground_truth: Vec<LabeledBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanAp {
    /// AP of every class that has at least one ground-truth box.
    pub per_class: BTreeMap<Digit, f64>,
    pub map: f64,
}

/// Per-class average precision with all-point interpolation, and its mean
/// over classes that have ground truth.
pub fn mean_ap(scenes: &[DetectionScene], iou_threshold: f64) -> Result<MeanAp> {
    let mut gt_per_class: BTreeMap<Digit, usize> = BTreeMap::new();
    for g in scenes.iter().flat_map(|s| &s.ground_truth) {
        *gt_per_class.entry(g.class).or_default() += 1;
    }
    if gt_per_class.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let mut per_class = BTreeMap::new();
    for (&class, &n_gt) in &gt_per_class {
        per_class.insert(class, class_ap(scenes, class, n_gt, iou_threshold));
    }
    let map = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(MeanAp { per_class, map })
}

fn class_ap(scenes: &[DetectionScene], class: Digit, n_gt: usize, threshold: f64) -> f64 {
    let mut ranked: Vec<(usize, &ScoredBox)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(si, s)| s.predictions.iter().map(move |p| (si, p)))
        .filter(|(_, p)| p.class == class)
        .collect();
    // Stable: equal confidences keep scene/prediction order.
    ranked.sort_by(|a, b| b.1.confidence.total_cmp(&a.1.confidence));

    let mut matched: Vec<Vec<bool>> = scenes
        .iter()
        .map(|s| alloc::vec![false; s.ground_truth.len()])
        .collect();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(ranked.len());
    for (si, det) in ranked {
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in scenes[si].ground_truth.iter().enumerate() {
            if g.class != class || matched[si][gi] {
                continue;
            }
            let overlap = iou(&det.bbox, &g.bbox);
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        match best {
            Some((gi, overlap)) if overlap >= threshold => {
                matched[si][gi] = true;
                tp += 1;
            }
            _ => fp += 1,
        }
        curve.push((tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64));
    }

    // Precision envelope, non-increasing from the right.
    let mut envelope = 0.0f64;
    for point in curve.iter_mut().rev() {
        envelope = envelope.max(point.1);
        point.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in curve {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Mean squared error of `predictions` against `targets`.
pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            left: predictions.len(),
            right: targets.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let sum: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    mse(predictions, targets).map(libm::sqrt)
}
