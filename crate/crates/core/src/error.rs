use alloc::string::String;
use alloc::vec::Vec;

use crate::dial::Digit;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("angle is not finite: {0}")]
    InvalidAngle(f64),

    #[error("dial value {0} outside [0, 10)")]
    InvalidDialValue(f64),

    #[error("digit {0} outside 0..=9")]
    InvalidDigit(u8),

    #[error("segment endpoints coincide")]
    DegenerateSegment,

    #[error("invalid box: {0}")]
    InvalidBox(&'static str),

    #[error("unsupported dial count {count}")]
    UnsupportedDialCount {
        count: usize,
        /// Raw per-dial digits in left-to-right order, for partial scoring.
        digits: Vec<Digit>,
    },

    #[error("consumption {value} not representable with {dials} dials")]
    ConsumptionOverflow { value: f64, dials: usize },

    #[error("at least two dials are required, got {0}")]
    InsufficientDials(usize),

    #[error("invalid thresholds: {0}")]
    InvalidThresholds(&'static str),

    #[error("invalid calibration grid: {0}")]
    InvalidGrid(&'static str),

    #[error("calibration set is empty")]
    EmptyCalibrationSet,

    #[error("calibration sample {index}: {reason}")]
    InvalidCalibrationSample { index: usize, reason: &'static str },

    #[error("evaluation set is empty")]
    EmptyEvaluationSet,

    #[error("cannot parse reading {0:?} as a non-negative integer")]
    ParseError(String),

    #[error("no ground-truth boxes")]
    EmptyGroundTruth,

    #[error("length mismatch: {left} vs {right}")]
    ShapeMismatch { left: usize, right: usize },

    #[error("invalid meter spec: {0}")]
    InvalidSpec(&'static str),

    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),

    #[error("invalid detection: {0}")]
    InvalidDetection(&'static str),
}
