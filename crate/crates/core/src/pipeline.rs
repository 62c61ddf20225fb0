//! From detector output to an assembled reading.
//!
//! `nms → order_dials → counter_tilt → rectify (once, if needed) →
//! orientation_pattern → dial_value → correction → digits`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::correction::{correct_chain, ChainDial, CorrectionThresholds};
use crate::dial::{
    angle_to_value, check_dial_count, orientation_pattern, value_to_angle, DialValue, Digit,
    Orientation,
};
use crate::error::{Error, Result};
use crate::geometry::{
    decode_angle, distance_to_line, iou, rotate_point, segment_angle, BBox, Point, UnitVec,
};

pub const DEFAULT_NMS_IOU: f64 = 0.5;
/// Tilts of at most this many degrees are left alone.
pub const ROTATION_THRESHOLD_DEG: f64 = 2.5;
/// Minimum IoU for pairing a class-score box with a regression box.
pub const PAIRING_IOU: f64 = 0.5;
/// Collinearity limit as a multiple of the median box height.
pub const COLLINEARITY_FACTOR: f64 = 0.75;
const SCORE_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DialPayload {
    /// Probabilities for digits 0–9.
    ClassScores([f64; 10]),
    Value(DialValue),
    SinCos(UnitVec),
}

impl DialPayload {
    pub fn is_discrete(&self) -> bool {
        matches!(self, DialPayload::ClassScores(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DialDetection {
    pub bbox: BBox,
    pub payload: DialPayload,
    pub confidence: f64,
}

impl DialDetection {
    pub fn new(bbox: BBox, payload: DialPayload, confidence: f64) -> Result<Self> {
        let det = DialDetection {
            bbox,
            payload,
            confidence,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.confidence.is_finite() && (0.0..=1.0).contains(&self.confidence)) {
            return Err(Error::InvalidDetection("confidence must lie in [0, 1]"));
        }
        match &self.payload {
            DialPayload::ClassScores(scores) => {
                if !scores.iter().all(|s| s.is_finite() && *s >= 0.0) {
                    return Err(Error::InvalidDetection("class scores must be non-negative"));
                }
                let sum: f64 = scores.iter().sum();
                if libm::fabs(sum - 1.0) > SCORE_SUM_TOLERANCE {
                    return Err(Error::InvalidDetection("class scores must sum to 1"));
                }
            }
            DialPayload::Value(_) => {}
            DialPayload::SinCos(v) => {
                if !(v.s.is_finite() && v.c.is_finite()) {
                    return Err(Error::InvalidDetection("sin/cos must be finite"));
                }
            }
        }
        Ok(())
    }
}

/// All detections found on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct MeterObservation {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub dials: Vec<DialDetection>,
}

impl MeterObservation {
    /// Clips every box to the image. Returns the indices of boxes that
    /// changed; fails if a box has no area left inside the image.
    pub fn clamp_to_bounds(&mut self) -> Result<Vec<usize>> {
        let mut changed = Vec::new();
        for (i, d) in self.dials.iter_mut().enumerate() {
            if d.bbox.is_within(self.width, self.height) {
                continue;
            }
            d.bbox = d
                .bbox
                .clamped(self.width, self.height)
                .ok_or(Error::InvalidBox("box lies outside the image"))?;
            changed.push(i);
        }
        Ok(changed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineMode {
    /// Digits from class scores; no correction.
    Detection,
    /// Digits from continuous values, with carry correction.
    Regression,
    /// Digits from class scores; paired continuous values decide corrections.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReadingWarning {
    /// A dial center lies too far from the line through the first and last.
    NonCollinear { deviation: f64, limit: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reading {
    pub digits: String,
    pub integer_value: u64,
    pub per_dial: Vec<DialValue>,
    /// Estimated tilt that was rectified; 0 when no rotation was applied.
    pub tilt_applied: f64,
    pub corrections_applied: usize,
    pub warnings: Vec<ReadingWarning>,
}

/// Callback that re-runs detection on the image rotated by the given angle
/// in degrees.
pub type Reobserve<'a> = &'a mut dyn FnMut(f64) -> MeterObservation;

/// Greedy non-maximum suppression in descending confidence (ties keep input
/// order). Survivors are returned in that order.
pub fn nms(dials: &[DialDetection], iou_threshold: f64) -> Vec<DialDetection> {
    let mut order: Vec<usize> = (0..dials.len()).collect();
    order.sort_by(|&a, &b| dials[b].confidence.total_cmp(&dials[a].confidence));
    let mut kept: Vec<DialDetection> = Vec::new();
    for i in order {
        let cand = &dials[i];
        if kept.iter().all(|k| iou(&k.bbox, &cand.bbox) < iou_threshold) {
            kept.push(*cand);
        }
    }
    kept
}

/// Left to right by box center; stable for equal x.
pub fn order_dials(dials: &[DialDetection]) -> Vec<DialDetection> {
    let mut out = dials.to_vec();
    out.sort_by(|a, b| a.bbox.cx.total_cmp(&b.bbox.cx));
    out
}

/// Tilt of the line through the first and last dial centers.
pub fn counter_tilt(ordered: &[DialDetection]) -> Result<f64> {
    match ordered {
        [first, .., last] => segment_angle(first.bbox.center(), last.bbox.center()),
        _ => Err(Error::InsufficientDials(ordered.len())),
    }
}

pub fn needs_rotation(theta: f64) -> bool {
    libm::fabs(theta) > ROTATION_THRESHOLD_DEG
}

fn centroid(dials: &[DialDetection]) -> Point {
    let n = dials.len().max(1) as f64;
    let (sx, sy) = dials
        .iter()
        .fold((0.0, 0.0), |(x, y), d| (x + d.bbox.cx, y + d.bbox.cy));
    Point::new(sx / n, sy / n)
}

/// Undoes a tilt of `theta` degrees.
///
/// With a `reobserve` callback the image is "rotated" by `-theta` and
/// detected again. Without one, box centers rotate by `-theta` about their
/// centroid and continuous payloads shift by `-theta` in clock angle; class
/// scores are left as they are.
pub fn rectify(
    obs: &MeterObservation,
    theta: f64,
    reobserve: Option<Reobserve<'_>>,
) -> MeterObservation {
    if let Some(callback) = reobserve {
        return callback(-theta);
    }
    if theta == 0.0 {
        return obs.clone();
    }
    let pivot = centroid(&obs.dials);
    let r = (-theta).to_radians();
    let (sin, cos) = (libm::sin(r), libm::cos(r));

    // Value payloads need each dial's orientation, taken from its rank
    // among the value dials counted from the right.
    let mut value_rank: Vec<usize> = (0..obs.dials.len())
        .filter(|&i| matches!(obs.dials[i].payload, DialPayload::Value(_)))
        .collect();
    value_rank.sort_by(|&a, &b| obs.dials[b].bbox.cx.total_cmp(&obs.dials[a].bbox.cx));

    let mut out = obs.clone();
    for (i, det) in out.dials.iter_mut().enumerate() {
        det.bbox = det
            .bbox
            .with_center(rotate_point(det.bbox.center(), pivot, -theta));
        det.payload = match det.payload {
            DialPayload::SinCos(v) => DialPayload::SinCos(UnitVec {
                s: v.s * cos + v.c * sin,
                c: v.c * cos - v.s * sin,
            }),
            DialPayload::Value(v) => {
                let rank = value_rank.iter().position(|&j| j == i).unwrap_or(0);
                let o = Orientation::from_right(rank);
                DialPayload::Value(angle_to_value(value_to_angle(v, o).shifted(-theta), o))
            }
            scores @ DialPayload::ClassScores(_) => scores,
        };
    }
    out
}

fn argmax_digit(scores: &[f64; 10]) -> Digit {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Digit::new(best as u8).expect("index below 10")
}

/// Continuous value of one dial and whether it came from class scores.
pub fn dial_value(det: &DialDetection, o: Orientation) -> (DialValue, bool) {
    match &det.payload {
        DialPayload::ClassScores(scores) => (
            DialValue::new(argmax_digit(scores).get() as f64).expect("digit is a valid value"),
            true,
        ),
        DialPayload::Value(v) => (*v, false),
        DialPayload::SinCos(v) => (angle_to_value(decode_angle(v.s, v.c), o), false),
    }
}

/// Per-dial output of the pipeline before correction.
#[derive(Debug, Clone, PartialEq)]
pub struct DialReadout {
    /// Uncorrected digit of each dial, left to right.
    pub digits: Vec<Digit>,
    /// Value of each dial as read from its primary payload.
    pub values: Vec<DialValue>,
    /// Continuous value used by the correction, where one exists.
    pub continuous: Vec<Option<DialValue>>,
    pub tilt_applied: f64,
    pub warnings: Vec<ReadingWarning>,
}

struct Groups {
    primary: Vec<DialDetection>,
    continuous: Vec<DialDetection>,
    primary_is_discrete: bool,
}

fn split(obs: &MeterObservation, mode: PipelineMode) -> Groups {
    let (discrete, continuous): (Vec<DialDetection>, Vec<DialDetection>) =
        obs.dials.iter().partition(|d| d.payload.is_discrete());
    let discrete = nms(&discrete, DEFAULT_NMS_IOU);
    let continuous = nms(&continuous, DEFAULT_NMS_IOU);
    let prefer_discrete = match mode {
        PipelineMode::Detection | PipelineMode::Hybrid => !discrete.is_empty(),
        PipelineMode::Regression => continuous.is_empty(),
    };
    let primary = if prefer_discrete {
        order_dials(&discrete)
    } else {
        order_dials(&continuous)
    };
    Groups {
        primary,
        continuous,
        primary_is_discrete: prefer_discrete,
    }
}

fn raw_digits(ordered: &[DialDetection]) -> Vec<Digit> {
    let n = ordered.len();
    ordered
        .iter()
        .enumerate()
        .map(|(i, d)| dial_value(d, Orientation::from_right(n - 1 - i)).0.digit())
        .collect()
}

fn checked_count(groups: &Groups) -> Result<()> {
    let n = groups.primary.len();
    check_dial_count(n).map_err(|_| Error::UnsupportedDialCount {
        count: n,
        digits: raw_digits(&groups.primary),
    })
}

fn collinearity(ordered: &[DialDetection]) -> Option<ReadingWarning> {
    let (first, last) = (ordered.first()?.bbox.center(), ordered.last()?.bbox.center());
    let mut heights: Vec<f64> = ordered.iter().map(|d| d.bbox.h).collect();
    heights.sort_by(f64::total_cmp);
    let mid = heights.len() / 2;
    let median = if heights.len().is_multiple_of(2) {
        (heights[mid - 1] + heights[mid]) / 2.0
    } else {
        heights[mid]
    };
    let limit = COLLINEARITY_FACTOR * median;
    let deviation = ordered
        .iter()
        .map(|d| distance_to_line(d.bbox.center(), first, last))
        .fold(0.0, f64::max);
    (deviation > limit).then_some(ReadingWarning::NonCollinear { deviation, limit })
}

/// Runs the pipeline up to per-dial values: suppression, ordering, tilt
/// rectification and payload decoding.
pub fn read_dials(
    obs: &MeterObservation,
    mode: PipelineMode,
    reobserve: Option<Reobserve<'_>>,
) -> Result<DialReadout> {
    let mut groups = split(obs, mode);
    checked_count(&groups)?;
    let tilt = counter_tilt(&groups.primary)?;
    let mut tilt_applied = 0.0;
    if needs_rotation(tilt) {
        let survivors = MeterObservation {
            dials: groups
                .primary
                .iter()
                .chain(if groups.primary_is_discrete {
                    groups.continuous.iter()
                } else {
                    [].iter()
                })
                .copied()
                .collect(),
            ..obs.clone()
        };
        let rectified = rectify(&survivors, tilt, reobserve);
        groups = split(&rectified, mode);
        checked_count(&groups)?;
        tilt_applied = tilt;
    }

    let mut warnings = Vec::new();
    if let Some(w) = collinearity(&groups.primary) {
        warnings.push(w);
    }

    let orientations = orientation_pattern(groups.primary.len())?;
    let mut used = alloc::vec![false; groups.continuous.len()];
    let mut digits = Vec::with_capacity(orientations.len());
    let mut values = Vec::with_capacity(orientations.len());
    let mut continuous = Vec::with_capacity(orientations.len());
    for (det, &o) in groups.primary.iter().zip(&orientations) {
        let (value, discrete) = dial_value(det, o);
        digits.push(value.digit());
        values.push(value);
        let cont = match mode {
            PipelineMode::Detection => None,
            PipelineMode::Regression => (!discrete).then_some(value),
            PipelineMode::Hybrid if !discrete => Some(value),
            PipelineMode::Hybrid => pair(det, &groups.continuous, &mut used).map(|d| dial_value(d, o).0),
        };
        continuous.push(cont);
    }

    Ok(DialReadout {
        digits,
        values,
        continuous,
        tilt_applied,
        warnings,
    })
}

fn pair<'a>(
    det: &DialDetection,
    candidates: &'a [DialDetection],
    used: &mut [bool],
) -> Option<&'a DialDetection> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        if used[i] {
            continue;
        }
        let overlap = iou(&det.bbox, &c.bbox);
        if overlap >= PAIRING_IOU && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((i, overlap));
        }
    }
    let (i, _) = best?;
    used[i] = true;
    Some(&candidates[i])
}

/// Assembles the final reading of one observation.
pub fn assemble_reading(
    obs: &MeterObservation,
    mode: PipelineMode,
    thresholds: &CorrectionThresholds,
    reobserve: Option<Reobserve<'_>>,
) -> Result<Reading> {
    let readout = read_dials(obs, mode, reobserve)?;
    let (digits, per_dial, corrections) = match mode {
        PipelineMode::Detection => (readout.digits, readout.values, 0),
        PipelineMode::Regression | PipelineMode::Hybrid => {
            let chain: Vec<ChainDial> = readout
                .digits
                .iter()
                .zip(&readout.continuous)
                .map(|(&digit, &continuous)| ChainDial { digit, continuous })
                .collect();
            let outcome = correct_chain(&chain, thresholds);
            let per_dial = outcome
                .corrected
                .iter()
                .zip(&outcome.digits)
                .map(|(c, d)| {
                    c.unwrap_or_else(|| DialValue::new(d.get() as f64).expect("digit is a valid value"))
                })
                .collect();
            (outcome.digits, per_dial, outcome.corrections)
        }
    };
    let text: String = digits.iter().map(|d| d.as_char()).collect();
    let integer_value = digits.iter().fold(0u64, |acc, d| acc * 10 + d.get() as u64);
    Ok(Reading {
        digits: text,
        integer_value,
        per_dial,
        tilt_applied: readout.tilt_applied,
        corrections_applied: corrections,
        warnings: readout.warnings,
    })
}
