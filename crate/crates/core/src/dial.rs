//! Dial orientation, value/angle mapping, mirror relabeling, and the
//! mechanical coupling between a register position and its dials.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::{wrap_period, AngleDeg};

/// Degrees of pointer travel per dial unit.
pub const DEGREES_PER_UNIT: f64 = 36.0;

/// Values within this distance below an integer floor up to that integer.
pub const FLOOR_GUARD: f64 = 1e-9;

pub const SUPPORTED_DIAL_COUNTS: [usize; 2] = [4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Cw,
    Ccw,
}

impl Orientation {
    pub fn opposite(self) -> Orientation {
        match self {
            Orientation::Cw => Orientation::Ccw,
            Orientation::Ccw => Orientation::Cw,
        }
    }

    /// Orientation of the dial `offset` places left of the rightmost one.
    /// The rightmost dial turns clockwise and neighbours alternate.
    pub fn from_right(offset: usize) -> Orientation {
        if offset.is_multiple_of(2) {
            Orientation::Cw
        } else {
            Orientation::Ccw
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Cw => "CW",
            Orientation::Ccw => "CCW",
        })
    }
}

/// Continuous dial position in `[0, 10)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DialValue(f64);

impl DialValue {
    pub const ZERO: DialValue = DialValue(0.0);

    pub fn new(v: f64) -> Result<Self> {
        if v.is_finite() && (0.0..10.0).contains(&v) {
            Ok(DialValue(v))
        } else {
            Err(Error::InvalidDialValue(v))
        }
    }

    /// Reduces any finite real modulo 10.
    pub fn wrapping(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::InvalidDialValue(v));
        }
        Ok(DialValue(wrap_period(v, 10.0)))
    }

    pub(crate) fn wrap_unchecked(v: f64) -> Self {
        DialValue(wrap_period(v, 10.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// The digit shown by the dial: the floor of the value, with values a
    /// hair below an integer snapped up to it.
    pub fn digit(self) -> Digit {
        let f = libm::floor(self.0 + FLOOR_GUARD);
        Digit((f as i64).rem_euclid(10) as u8)
    }

    /// Fractional part relative to [`DialValue::digit`], in `[0, 1)`.
    pub fn fraction(self) -> f64 {
        let f = libm::floor(self.0 + FLOOR_GUARD);
        (self.0 - f).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digit(u8);

impl Digit {
    pub fn new(d: u8) -> Result<Self> {
        if d <= 9 {
            Ok(Digit(d))
        } else {
            Err(Error::InvalidDigit(d))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// `(self + delta) mod 10`.
    pub fn offset(self, delta: i8) -> Digit {
        Digit((self.0 as i16 + delta as i16).rem_euclid(10) as u8)
    }

    pub fn as_char(self) -> char {
        (b'0' + self.0) as char
    }

    pub fn from_char(c: char) -> Option<Digit> {
        c.to_digit(10).map(|d| Digit(d as u8))
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Continuous register position in kWh.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Consumption(f64);

impl Consumption {
    pub fn new(c: f64) -> Result<Self> {
        if c.is_finite() && c >= 0.0 {
            Ok(Consumption(c))
        } else {
            Err(Error::ConsumptionOverflow { value: c, dials: 0 })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    fn check_fits(self, k: usize) -> Result<()> {
        check_dial_count(k)?;
        if self.0 < libm::pow(10.0, k as f64) {
            Ok(())
        } else {
            Err(Error::ConsumptionOverflow {
                value: self.0,
                dials: k,
            })
        }
    }
}

pub fn check_dial_count(k: usize) -> Result<()> {
    if SUPPORTED_DIAL_COUNTS.contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedDialCount {
            count: k,
            digits: Vec::new(),
        })
    }
}

/// Left-to-right orientations of a `k`-dial counter.
pub fn orientation_pattern(k: usize) -> Result<Vec<Orientation>> {
    check_dial_count(k)?;
    Ok((0..k).map(|i| Orientation::from_right(k - 1 - i)).collect())
}

pub fn value_to_angle(v: DialValue, o: Orientation) -> AngleDeg {
    let cw = v.0 * DEGREES_PER_UNIT;
    let raw = match o {
        Orientation::Cw => cw,
        Orientation::Ccw => 360.0 - cw,
    };
    AngleDeg::ZERO.shifted(raw)
}

pub fn angle_to_value(theta: AngleDeg, o: Orientation) -> DialValue {
    let deg = match o {
        Orientation::Cw => theta.degrees(),
        Orientation::Ccw => 360.0 - theta.degrees(),
    };
    DialValue::wrap_unchecked(deg / DEGREES_PER_UNIT)
}

/// The value read at the same pointer angle under the opposite orientation.
pub fn mirror_value(v: DialValue) -> DialValue {
    DialValue::wrap_unchecked(10.0 - v.0)
}

/// Label mirror: the interval `[d, d+1)` maps onto `[9-d, 10-d)`.
pub fn mirror_digit(d: Digit) -> Digit {
    Digit(9 - d.0)
}

/// Per-dial values, most significant first: `v_i = (C / 10^(k-i)) mod 10`.
pub fn decompose_consumption(c: Consumption, k: usize) -> Result<Vec<DialValue>> {
    c.check_fits(k)?;
    Ok((1..=k)
        .map(|i| {
            let scale = libm::pow(10.0, (k - i) as f64);
            DialValue::wrap_unchecked(c.0 / scale)
        })
        .collect())
}

/// Zero-padded digits of `floor(C)`.
pub fn true_reading(c: Consumption, k: usize) -> Result<String> {
    c.check_fits(k)?;
    let whole = libm::floor(c.0) as u64;
    Ok(alloc::format!("{whole:0k$}"))
}
