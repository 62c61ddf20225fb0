//! Line-delimited JSON formats: detections, ground truth and predictions,
//! plus the threshold and grid documents.
//!
//! Every record sits on one line; blank lines are skipped. Parse errors and
//! validation errors carry the 1-based line number, and validation errors
//! also name the offending field (`dials[0].bbox.w`).

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use dialmeter_core::correction::{CarryDown, CarryUp, CalibrationGrid};
use dialmeter_core::pipeline::{Reading, ReadingWarning};
use dialmeter_core::{
    BBox, CorrectionThresholds, DialDetection, DialPayload, DialValue, MeterObservation, UnitVec,
};
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub image_id: String,
    pub width: f64,
    pub height: f64,
    pub dials: Vec<DialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialRecord {
    /// `[cx, cy, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub payload: PayloadRecord,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayloadRecord {
    ClassScores(Vec<f64>),
    Value(f64),
    Sincos([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub reading: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dials: Vec<GroundTruthDial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDial {
    pub bbox: [f64; 4],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: String,
    pub reading: String,
    #[serde(default)]
    pub integer_value: u64,
    #[serde(default)]
    pub per_dial: Vec<f64>,
    #[serde(default)]
    pub tilt_applied: f64,
    #[serde(default)]
    pub corrections_applied: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PredictionRecord {
    pub fn from_reading(image_id: &str, reading: &Reading) -> Self {
        PredictionRecord {
            image_id: image_id.to_string(),
            reading: reading.digits.clone(),
            integer_value: reading.integer_value,
            per_dial: reading.per_dial.iter().map(|v| v.get()).collect(),
            tilt_applied: reading.tilt_applied,
            corrections_applied: reading.corrections_applied,
            warnings: reading
                .warnings
                .iter()
                .map(|w| match w {
                    ReadingWarning::NonCollinear { deviation, limit } => {
                        format!("non-collinear dials: deviation {deviation:.3} px exceeds {limit:.3} px")
                    }
                })
                .collect(),
        }
    }
}

/// A parsed detections line with the indices of boxes clipped to the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedObservation {
    pub observation: MeterObservation,
    pub line: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub reading: String,
    pub dials: Vec<(BBox, DialValue)>,
    pub line: usize,
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, line: usize) -> Result<T> {
    serde_json::from_str(text).map_err(|e| FormatError::Parse {
        line,
        message: e.to_string(),
    })
}

fn for_each_line(path: &Path, mut f: impl FnMut(&str, usize) -> Result<()>) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| FormatError::io(path, e))?;
    let reader = BufReader::new(file);
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| FormatError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        f(&text, line_no)?;
    }
    Ok(())
}

fn check_unique(seen: &mut HashSet<String>, id: &str, line: usize) -> Result<()> {
    if id.is_empty() {
        return Err(FormatError::validation(line, "image_id", "must not be empty"));
    }
    if !seen.insert(id.to_string()) {
        return Err(FormatError::validation(line, "image_id", format!("duplicate id {id:?}")));
    }
    Ok(())
}

fn to_bbox(raw: &[f64; 4], line: usize, field: &str) -> Result<BBox> {
    let [cx, cy, w, h] = *raw;
    if !cx.is_finite() {
        return Err(FormatError::validation(line, format!("{field}.cx"), "must be finite"));
    }
    if !cy.is_finite() {
        return Err(FormatError::validation(line, format!("{field}.cy"), "must be finite"));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(FormatError::validation(line, format!("{field}.w"), "must be positive"));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(FormatError::validation(line, format!("{field}.h"), "must be positive"));
    }
    Ok(BBox { cx, cy, w, h })
}

fn to_payload(p: &PayloadRecord, line: usize, field: &str) -> Result<DialPayload> {
    let data = format!("{field}.data");
    match p {
        PayloadRecord::ClassScores(scores) => {
            let arr: [f64; 10] = scores.as_slice().try_into().map_err(|_| {
                FormatError::validation(line, &data, format!("expected 10 scores, got {}", scores.len()))
            })?;
            Ok(DialPayload::ClassScores(arr))
        }
        PayloadRecord::Value(v) => DialValue::new(*v)
            .map(DialPayload::Value)
            .map_err(|_| FormatError::validation(line, &data, "value must lie in [0, 10)")),
        PayloadRecord::Sincos([s, c]) => Ok(DialPayload::SinCos(UnitVec::new(*s, *c))),
    }
}

/// Validates one detections record and clips its boxes to the image.
pub fn observation_from_record(rec: DetectionRecord, line: usize) -> Result<ParsedObservation> {
    if !(rec.width.is_finite() && rec.width > 0.0) {
        return Err(FormatError::validation(line, "width", "must be positive"));
    }
    if !(rec.height.is_finite() && rec.height > 0.0) {
        return Err(FormatError::validation(line, "height", "must be positive"));
    }
    let mut dials = Vec::with_capacity(rec.dials.len());
    for (i, d) in rec.dials.iter().enumerate() {
        let field = format!("dials[{i}]");
        let bbox = to_bbox(&d.bbox, line, &format!("{field}.bbox"))?;
        let payload = to_payload(&d.payload, line, &format!("{field}.payload"))?;
        let det = DialDetection {
            bbox,
            payload,
            confidence: d.confidence,
        };
        if !(d.confidence.is_finite() && (0.0..=1.0).contains(&d.confidence)) {
            return Err(FormatError::validation(line, format!("{field}.confidence"), "must lie in [0, 1]"));
        }
        det.validate().map_err(|e| {
            FormatError::validation(line, format!("{field}.payload.data"), e.to_string())
        })?;
        dials.push(det);
    }
    let mut observation = MeterObservation {
        image_id: rec.image_id,
        width: rec.width,
        height: rec.height,
        dials,
    };
    let mut warnings = Vec::new();
    let before = observation.dials.clone();
    match observation.clamp_to_bounds() {
        Ok(changed) => {
            for i in changed {
                warnings.push(format!("dials[{i}].bbox clamped to the image bounds"));
            }
        }
        Err(_) => {
            let i = before
                .iter()
                .position(|d| d.bbox.clamped(observation.width, observation.height).is_none())
                .unwrap_or(0);
            return Err(FormatError::validation(
                line,
                format!("dials[{i}].bbox"),
                "box lies outside the image",
            ));
        }
    }
    Ok(ParsedObservation {
        observation,
        line,
        warnings,
    })
}

pub fn parse_detection_line(text: &str, line: usize) -> Result<ParsedObservation> {
    observation_from_record(parse_json(text, line)?, line)
}

pub fn parse_detections(path: &Path) -> Result<Vec<ParsedObservation>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |text, line| {
        let parsed = parse_detection_line(text, line)?;
        check_unique(&mut seen, &parsed.observation.image_id, line)?;
        out.push(parsed);
        Ok(())
    })?;
    Ok(out)
}

pub fn detection_record(obs: &MeterObservation) -> DetectionRecord {
    DetectionRecord {
        image_id: obs.image_id.clone(),
        width: obs.width,
        height: obs.height,
        dials: obs
            .dials
            .iter()
            .map(|d| DialRecord {
                bbox: [d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h],
                payload: match d.payload {
                    DialPayload::ClassScores(s) => PayloadRecord::ClassScores(s.to_vec()),
                    DialPayload::Value(v) => PayloadRecord::Value(v.get()),
                    DialPayload::SinCos(v) => PayloadRecord::Sincos([v.s, v.c]),
                },
                confidence: d.confidence,
            })
            .collect(),
    }
}

pub fn detection_line(obs: &MeterObservation) -> String {
    serde_json::to_string(&detection_record(obs)).expect("records serialize")
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut buf = String::new();
    for l in lines {
        buf.push_str(&l);
        buf.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    file.write_all(buf.as_bytes())
        .map_err(|e| FormatError::io(path, e))
}

pub fn write_detections(path: &Path, observations: &[MeterObservation]) -> Result<()> {
    write_lines(path, observations.iter().map(detection_line))
}

pub fn ground_truth_from_record(rec: GroundTruthRecord, line: usize) -> Result<GroundTruth> {
    if rec.reading.is_empty() || !rec.reading.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FormatError::validation(line, "reading", "must be a non-empty digit string"));
    }
    let mut dials = Vec::with_capacity(rec.dials.len());
    for (i, d) in rec.dials.iter().enumerate() {
        let bbox = to_bbox(&d.bbox, line, &format!("dials[{i}].bbox"))?;
        let value = DialValue::new(d.value).map_err(|_| {
            FormatError::validation(line, format!("dials[{i}].value"), "must lie in [0, 10)")
        })?;
        dials.push((bbox, value));
    }
    Ok(GroundTruth {
        image_id: rec.image_id,
        reading: rec.reading,
        dials,
        line,
    })
}

pub fn parse_ground_truth_line(text: &str, line: usize) -> Result<GroundTruth> {
    ground_truth_from_record(parse_json(text, line)?, line)
}

pub fn parse_ground_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |text, line| {
        let gt = parse_ground_truth_line(text, line)?;
        check_unique(&mut seen, &gt.image_id, line)?;
        out.push(gt);
        Ok(())
    })?;
    Ok(out)
}

pub fn ground_truth_line(gt: &GroundTruth) -> String {
    let rec = GroundTruthRecord {
        image_id: gt.image_id.clone(),
        reading: gt.reading.clone(),
        dials: gt
            .dials
            .iter()
            .map(|(b, v)| GroundTruthDial {
                bbox: [b.cx, b.cy, b.w, b.h],
                value: v.get(),
            })
            .collect(),
    };
    serde_json::to_string(&rec).expect("records serialize")
}

pub fn write_ground_truth(path: &Path, records: &[GroundTruth]) -> Result<()> {
    write_lines(path, records.iter().map(ground_truth_line))
}

pub fn parse_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |text, line| {
        let rec: PredictionRecord = parse_json(text, line)?;
        if rec.reading.is_empty() || !rec.reading.bytes().all(|b| b.is_ascii_digit()) {
            return Err(FormatError::validation(line, "reading", "must be a non-empty digit string"));
        }
        check_unique(&mut seen, &rec.image_id, line)?;
        out.push(rec);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    write_lines(
        path,
        records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize")),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarryUpDoc {
    pub cur_frac_min: f64,
    pub next_val_max: f64,
    #[serde(default = "enabled")]
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarryDownDoc {
    pub cur_frac_max: f64,
    pub next_val_min: f64,
    #[serde(default = "enabled")]
    pub enabled: bool,
}

fn enabled() -> bool {
    true
}

/// Key-value document holding a [`CorrectionThresholds`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdsDoc {
    pub carry_up: CarryUpDoc,
    pub carry_down: CarryDownDoc,
}

impl From<&CorrectionThresholds> for ThresholdsDoc {
    fn from(t: &CorrectionThresholds) -> Self {
        let (up, down) = (t.carry_up(), t.carry_down());
        ThresholdsDoc {
            carry_up: CarryUpDoc {
                cur_frac_min: up.cur_frac_min,
                next_val_max: up.next_val_max,
                enabled: up.enabled,
            },
            carry_down: CarryDownDoc {
                cur_frac_max: down.cur_frac_max,
                next_val_min: down.next_val_min,
                enabled: down.enabled,
            },
        }
    }
}

impl ThresholdsDoc {
    pub fn to_thresholds(&self) -> Result<CorrectionThresholds> {
        CorrectionThresholds::from_parts(
            CarryUp {
                cur_frac_min: self.carry_up.cur_frac_min,
                next_val_max: self.carry_up.next_val_max,
                enabled: self.carry_up.enabled,
            },
            CarryDown {
                cur_frac_max: self.carry_down.cur_frac_max,
                next_val_min: self.carry_down.next_val_min,
                enabled: self.carry_down.enabled,
            },
        )
        .map_err(|e| FormatError::validation(1, "thresholds", e.to_string()))
    }
}

fn read_document<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_document<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("documents serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub fn read_thresholds(path: &Path) -> Result<CorrectionThresholds> {
    read_document::<ThresholdsDoc>(path)?.to_thresholds()
}

pub fn write_thresholds(path: &Path, t: &CorrectionThresholds) -> Result<()> {
    write_document(path, &ThresholdsDoc::from(t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub cur_frac_min: Vec<f64>,
    pub next_val_max: Vec<f64>,
    pub cur_frac_max: Vec<f64>,
    pub next_val_min: Vec<f64>,
}

pub fn read_grid(path: &Path) -> Result<CalibrationGrid> {
    let doc: GridDoc = read_document(path)?;
    let grid = CalibrationGrid {
        cur_frac_min: doc.cur_frac_min,
        next_val_max: doc.next_val_max,
        cur_frac_max: doc.cur_frac_max,
        next_val_min: doc.next_val_min,
    };
    grid.validate()
        .map_err(|e| FormatError::validation(1, "grid", e.to_string()))?;
    Ok(grid)
}

pub fn write_grid(path: &Path, grid: &CalibrationGrid) -> Result<()> {
    write_document(
        path,
        &GridDoc {
            cur_frac_min: grid.cur_frac_min.clone(),
            next_val_max: grid.next_val_max.clone(),
            cur_frac_max: grid.cur_frac_max.clone(),
            next_val_min: grid.next_val_min.clone(),
        },
    )
}
