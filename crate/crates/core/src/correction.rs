//! Cross-dial carry correction and threshold calibration.
//!
//! A dial's fractional position has to agree with the value of the dial to
//! its right: a pointer just short of `4` (fraction `0.9`) implies the next
//! dial is near `9`. When the current fraction is high but the next dial is
//! low, the current dial has most likely passed its mark and is carried up;
//! the mirrored case carries it down. The rightmost dial has no neighbour and
//! is never corrected.

use alloc::string::String;
use alloc::vec::Vec;

use crate::dial::{DialValue, Digit};
use crate::error::{Error, Result};
use crate::metrics::levenshtein;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarryUp {
    /// Lowest fractional part of the current dial that may carry up.
    pub cur_frac_min: f64,
    /// The next dial must read strictly below this value.
    pub next_val_max: f64,
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarryDown {
    /// Highest fractional part of the current dial that may carry down.
    pub cur_frac_max: f64,
    /// The next dial must read at or above this value.
    pub next_val_min: f64,
    pub enabled: bool,
}

/// The two threshold pairs of the correction rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionThresholds {
    carry_up: CarryUp,
    carry_down: CarryDown,
}

impl Default for CorrectionThresholds {
    /// Carry up at `N.75` / `< 2.5`, carry down at `N.25` / `>= 7.5`.
    fn default() -> Self {
        CorrectionThresholds {
            carry_up: CarryUp {
                cur_frac_min: 0.75,
                next_val_max: 2.5,
                enabled: true,
            },
            carry_down: CarryDown {
                cur_frac_max: 0.25,
                next_val_min: 7.5,
                enabled: true,
            },
        }
    }
}

fn open_range(v: f64, lo: f64, hi: f64) -> bool {
    v.is_finite() && v > lo && v < hi
}

impl CorrectionThresholds {
    /// Both directions enabled.
    pub fn new(
        cur_frac_min: f64,
        next_val_max: f64,
        cur_frac_max: f64,
        next_val_min: f64,
    ) -> Result<Self> {
        Self::from_parts(
            CarryUp {
                cur_frac_min,
                next_val_max,
                enabled: true,
            },
            CarryDown {
                cur_frac_max,
                next_val_min,
                enabled: true,
            },
        )
    }

    pub fn from_parts(carry_up: CarryUp, carry_down: CarryDown) -> Result<Self> {
        if !open_range(carry_up.cur_frac_min, 0.5, 1.0) {
            return Err(Error::InvalidThresholds("carry_up.cur_frac_min must lie in (0.5, 1)"));
        }
        if !open_range(carry_up.next_val_max, 0.0, 5.0) {
            return Err(Error::InvalidThresholds("carry_up.next_val_max must lie in (0, 5)"));
        }
        if !open_range(carry_down.cur_frac_max, 0.0, 0.5) {
            return Err(Error::InvalidThresholds("carry_down.cur_frac_max must lie in (0, 0.5)"));
        }
        if !open_range(carry_down.next_val_min, 5.0, 10.0) {
            return Err(Error::InvalidThresholds("carry_down.next_val_min must lie in (5, 10)"));
        }
        Ok(CorrectionThresholds {
            carry_up,
            carry_down,
        })
    }

    /// Default bounds with both directions switched off.
    pub fn disabled() -> Self {
        Self::default().with_enabled(false, false)
    }

    pub fn with_enabled(mut self, carry_up: bool, carry_down: bool) -> Self {
        self.carry_up.enabled = carry_up;
        self.carry_down.enabled = carry_down;
        self
    }

    pub fn carry_up(&self) -> CarryUp {
        self.carry_up
    }

    pub fn carry_down(&self) -> CarryDown {
        self.carry_down
    }

    /// `(cur_frac_min, next_val_max, cur_frac_max, next_val_min)`.
    pub fn as_tuple(&self) -> [f64; 4] {
        [
            self.carry_up.cur_frac_min,
            self.carry_up.next_val_max,
            self.carry_down.cur_frac_max,
            self.carry_down.next_val_min,
        ]
    }

    /// `+1` to carry up, `-1` to carry down, `0` to leave the dial alone.
    pub fn carry(&self, cur_fraction: f64, next_value: f64) -> i8 {
        let up = &self.carry_up;
        if up.enabled && cur_fraction >= up.cur_frac_min && next_value < up.next_val_max {
            return 1;
        }
        let down = &self.carry_down;
        if down.enabled && cur_fraction <= down.cur_frac_max && next_value >= down.next_val_min {
            return -1;
        }
        0
    }
}

/// Corrects one dial against the dial on its right. The corrected value is
/// the resulting digit plus a tenth of the neighbour's value.
pub fn correct_dial(
    v_cur: DialValue,
    v_next: DialValue,
    t: &CorrectionThresholds,
) -> (DialValue, Digit) {
    let digit = v_cur.digit().offset(t.carry(v_cur.fraction(), v_next.get()));
    (carried_value(digit, v_next), digit)
}

fn carried_value(digit: Digit, next: DialValue) -> DialValue {
    DialValue::wrap_unchecked(digit.get() as f64 + next.get() / 10.0)
}

/// One dial as seen by [`correct_chain`]: the digit to start from and, when
/// known, its continuous position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainDial {
    pub digit: Digit,
    pub continuous: Option<DialValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub digits: Vec<Digit>,
    /// Corrected continuous values; `None` where the dial had none.
    pub corrected: Vec<Option<DialValue>>,
    pub corrections: usize,
}

/// Right-to-left correction pass. Each dial is checked against the
/// *corrected* value of its right neighbour, so carries cascade. Dials
/// without a continuous value, or whose neighbour has none, keep their digit.
pub fn correct_chain(dials: &[ChainDial], t: &CorrectionThresholds) -> ChainOutcome {
    let n = dials.len();
    let mut digits = alloc::vec![Digit::new(0).unwrap(); n];
    let mut corrected = alloc::vec![None; n];
    let mut corrections = 0;
    let mut next: Option<DialValue> = None;
    for i in (0..n).rev() {
        let dial = dials[i];
        let (digit, value) = match (dial.continuous, next) {
            (Some(cur), Some(nv)) if i + 1 < n => {
                let shift = t.carry(cur.fraction(), nv.get());
                if shift != 0 {
                    corrections += 1;
                }
                let digit = dial.digit.offset(shift);
                (digit, Some(carried_value(digit, nv)))
            }
            (cur, _) => (dial.digit, cur),
        };
        digits[i] = digit;
        corrected[i] = value;
        next = value;
    }
    ChainOutcome {
        digits,
        corrected,
        corrections,
    }
}

/// Corrected digits for a sequence of continuous dial values, most
/// significant first.
pub fn correct_sequence(values: &[DialValue], t: &CorrectionThresholds) -> Vec<Digit> {
    let chain: Vec<ChainDial> = values
        .iter()
        .map(|&v| ChainDial {
            digit: v.digit(),
            continuous: Some(v),
        })
        .collect();
    correct_chain(&chain, t).digits
}

/// Candidate values for the four thresholds. Every list must be non-empty,
/// strictly ascending and inside the corresponding threshold range.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationGrid {
    pub cur_frac_min: Vec<f64>,
    pub next_val_max: Vec<f64>,
    pub cur_frac_max: Vec<f64>,
    pub next_val_min: Vec<f64>,
}

fn lattice(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + step * i as f64).collect()
}

impl Default for CalibrationGrid {
    /// Fractions `0.55..=0.95` and values `0.5..=4.5`, mirrored for carry-down.
    fn default() -> Self {
        CalibrationGrid {
            cur_frac_min: lattice(0.55, 0.05, 9),
            next_val_max: lattice(0.5, 0.5, 9),
            cur_frac_max: lattice(0.05, 0.05, 9),
            next_val_min: lattice(5.5, 0.5, 9),
        }
    }
}

impl CalibrationGrid {
    pub fn validate(&self) -> Result<()> {
        let axes: [(&[f64], f64, f64, &'static str); 4] = [
            (&self.cur_frac_min, 0.5, 1.0, "cur_frac_min candidates must lie in (0.5, 1)"),
            (&self.next_val_max, 0.0, 5.0, "next_val_max candidates must lie in (0, 5)"),
            (&self.cur_frac_max, 0.0, 0.5, "cur_frac_max candidates must lie in (0, 0.5)"),
            (&self.next_val_min, 5.0, 10.0, "next_val_min candidates must lie in (5, 10)"),
        ];
        for (axis, lo, hi, msg) in axes {
            if axis.is_empty() {
                return Err(Error::InvalidGrid("every candidate list must be non-empty"));
            }
            if !axis.iter().all(|&v| open_range(v, lo, hi)) {
                return Err(Error::InvalidGrid(msg));
            }
            if !axis.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvalidGrid("candidate lists must be strictly ascending"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.cur_frac_min.len()
            * self.next_val_max.len()
            * self.cur_frac_max.len()
            * self.next_val_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in lexicographic order of their 4-tuples.
    pub fn points(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        self.cur_frac_min.iter().flat_map(move |&a| {
            self.next_val_max.iter().flat_map(move |&b| {
                self.cur_frac_max
                    .iter()
                    .flat_map(move |&c| self.next_val_min.iter().map(move |&d| [a, b, c, d]))
            })
        })
    }
}

/// Continuous dial values of one meter with its ground-truth reading.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSample {
    pub values: Vec<DialValue>,
    pub truth: String,
}

impl CalibrationSample {
    pub fn new(values: Vec<DialValue>, truth: impl Into<String>) -> Self {
        CalibrationSample {
            values,
            truth: truth.into(),
        }
    }
}

/// Aggregate quality of one grid point, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Score {
    matches: usize,
    /// Sum of edit distances scaled to a common denominator; lower is better.
    scaled_edits: u64,
    /// Sum of absolute integer errors; lower is better.
    abs_error: u128,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        (self.matches, core::cmp::Reverse(self.scaled_edits), core::cmp::Reverse(self.abs_error))
            > (other.matches, core::cmp::Reverse(other.scaled_edits), core::cmp::Reverse(other.abs_error))
    }
}

struct Prepared {
    digits: Vec<Digit>,
    values: Vec<DialValue>,
    truth: Vec<u8>,
    truth_int: u128,
    weight: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Searches the grid exhaustively for the thresholds with the best meter
/// recognition rate on `samples`. Ties go to the higher dial recognition
/// rate, then the lower mean absolute error, then the lexicographically
/// smallest 4-tuple.
pub fn calibrate(
    samples: &[CalibrationSample],
    grid: &CalibrationGrid,
) -> Result<CorrectionThresholds> {
    if samples.is_empty() {
        return Err(Error::EmptyCalibrationSet);
    }
    grid.validate()?;

    let mut lcm = 1u64;
    for (index, s) in samples.iter().enumerate() {
        if s.values.is_empty() {
            return Err(Error::InvalidCalibrationSample {
                index,
                reason: "no dial values",
            });
        }
        if s.truth.len() != s.values.len() || !s.truth.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::InvalidCalibrationSample {
                index,
                reason: "ground truth must be digits, one per dial",
            });
        }
        let len = s.values.len() as u64;
        lcm = lcm / gcd(lcm, len) * len;
    }
    let prepared: Vec<Prepared> = samples
        .iter()
        .map(|s| Prepared {
            digits: s.values.iter().map(|v| v.digit()).collect(),
            values: s.values.clone(),
            truth: s.truth.bytes().map(|b| b - b'0').collect(),
            truth_int: s.truth.bytes().fold(0u128, |acc, b| acc * 10 + (b - b'0') as u128),
            weight: lcm / s.values.len() as u64,
        })
        .collect();

    let mut best: Option<(Score, [f64; 4])> = None;
    let mut pred: Vec<u8> = Vec::new();
    let mut chain: Vec<ChainDial> = Vec::new();
    for point in grid.points() {
        let t = CorrectionThresholds::new(point[0], point[1], point[2], point[3])?;
        let mut score = Score {
            matches: 0,
            scaled_edits: 0,
            abs_error: 0,
        };
        for p in &prepared {
            chain.clear();
            chain.extend(p.digits.iter().zip(&p.values).map(|(&digit, &v)| ChainDial {
                digit,
                continuous: Some(v),
            }));
            let outcome = correct_chain(&chain, &t);
            pred.clear();
            pred.extend(outcome.digits.iter().map(|d| d.get()));
            if pred == p.truth {
                score.matches += 1;
                continue;
            }
            score.scaled_edits += levenshtein(&pred, &p.truth) as u64 * p.weight;
            let pred_int = pred.iter().fold(0u128, |acc, &d| acc * 10 + d as u128);
            score.abs_error += pred_int.abs_diff(p.truth_int);
        }
        match &best {
            Some((b, _)) if !score.better_than(b) => {}
            _ => best = Some((score, point)),
        }
    }
    let point = best.map(|(_, p)| p).ok_or(Error::InvalidGrid("grid has no points"))?;
    CorrectionThresholds::new(point[0], point[1], point[2], point[3])
}
