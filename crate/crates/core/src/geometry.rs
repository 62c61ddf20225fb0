//! Clock angles, the sine/cosine angle codec, axis-aligned boxes and in-plane
//! rotation.
//!
//! Angles are "clock angles": degrees clockwise from the 12 o'clock pointer
//! position. Image coordinates are y-down, so a positive rotation by `φ`
//! turns a point visually clockwise and raises [`segment_angle`] by `φ`.

use crate::error::{Error, Result};

/// An angle in degrees normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub const ZERO: AngleDeg = AngleDeg(0.0);

    pub fn new(raw: f64) -> Result<Self> {
        normalize_angle(raw)
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    /// Shortest unsigned angular distance between two angles, in `[0, 180]`.
    pub fn circular_distance(self, other: AngleDeg) -> f64 {
        let d = libm::fabs(self.0 - other.0);
        if d > 180.0 {
            360.0 - d
        } else {
            d
        }
    }

    /// `self + delta`, renormalized. `delta` must be finite.
    pub fn shifted(self, delta: f64) -> AngleDeg {
        AngleDeg(wrap(self.0 + delta, 360.0))
    }
}

/// Sine/cosine pair. Only values produced by [`encode_angle`] are unit-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec {
    pub s: f64,
    pub c: f64,
}

impl UnitVec {
    pub fn new(s: f64, c: f64) -> Self {
        UnitVec { s, c }
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.s, self.c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Axis-aligned box stored as center and extent, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidBox("center is not finite"));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidBox("width must be positive"));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidBox("height must be positive"));
        }
        Ok(BBox { cx, cy, w, h })
    }

    /// Builds a box from corner coordinates `(x0, y0)`–`(x1, y1)`.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        BBox::new((x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0)
    }

    pub fn center(&self) -> Point {
        Point::new(self.cx, self.cy)
    }

    pub fn x0(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn y0(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn x1(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn y1(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Same extent, new center.
    pub fn with_center(&self, p: Point) -> BBox {
        BBox {
            cx: p.x,
            cy: p.y,
            ..*self
        }
    }

    /// Intersects the box with `[0, width] × [0, height]`. Returns `None`
    /// when nothing of positive area remains.
    pub fn clamped(&self, width: f64, height: f64) -> Option<BBox> {
        let x0 = self.x0().clamp(0.0, width);
        let y0 = self.y0().clamp(0.0, height);
        let x1 = self.x1().clamp(0.0, width);
        let y1 = self.y1().clamp(0.0, height);
        BBox::from_corners(x0, y0, x1, y1).ok()
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x0() >= 0.0 && self.y0() >= 0.0 && self.x1() <= width && self.y1() <= height
    }
}

fn wrap(value: f64, period: f64) -> f64 {
    let mut r = libm::fmod(value, period);
    if r < 0.0 {
        r += period;
    }
    // fmod of a tiny negative plus the period can round up to the period.
    if r >= period {
        r = 0.0;
    }
    r
}

pub(crate) fn wrap_period(value: f64, period: f64) -> f64 {
    wrap(value, period)
}

pub fn normalize_angle(raw: f64) -> Result<AngleDeg> {
    if !raw.is_finite() {
        return Err(Error::InvalidAngle(raw));
    }
    Ok(AngleDeg(wrap(raw, 360.0)))
}

pub fn encode_angle(theta: AngleDeg) -> UnitVec {
    let r = theta.0.to_radians();
    UnitVec {
        s: libm::sin(r),
        c: libm::cos(r),
    }
}

/// Inverse of [`encode_angle`]; scale-invariant, and `(0, 0)` decodes to 0.
pub fn decode_angle(s: f64, c: f64) -> AngleDeg {
    if s == 0.0 && c == 0.0 {
        return AngleDeg::ZERO;
    }
    AngleDeg(wrap(libm::atan2(s, c).to_degrees(), 360.0))
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x1().min(b.x1()) - a.x0().max(b.x0());
    let ih = a.y1().min(b.y1()) - a.y0().max(b.y0());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    // Areas from corners, so that iou(a, a) is exactly 1.
    let corner_area = |r: &BBox| (r.x1() - r.x0()) * (r.y1() - r.y0());
    let inter = iw * ih;
    let union = corner_area(a) + corner_area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Tilt of the line through `p1` and `p2` against the x-axis, folded into
/// `(-90, 90]` so the direction of travel does not matter. Positive when the
/// line descends to the right.
pub fn segment_angle(p1: Point, p2: Point) -> Result<f64> {
    let dx = p2.x - p1.x;
    let dy = p2.y - p1.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateSegment);
    }
    let mut a = libm::atan2(dy, dx).to_degrees();
    if a > 90.0 {
        a -= 180.0;
    } else if a <= -90.0 {
        a += 180.0;
    }
    Ok(a)
}

/// Rotates `p` by `phi` degrees about `center` (y-down convention).
pub fn rotate_point(p: Point, center: Point, phi: f64) -> Point {
    let r = phi.to_radians();
    let (sin, cos) = (libm::sin(r), libm::cos(r));
    let dx = p.x - center.x;
    let dy = p.y - center.y;
    Point {
        x: center.x + dx * cos - dy * sin,
        y: center.y + dx * sin + dy * cos,
    }
}

/// Perpendicular distance from `p` to the infinite line through `a` and `b`.
pub fn distance_to_line(p: Point, a: Point, b: Point) -> f64 {
    let len = a.distance(b);
    if len == 0.0 {
        return p.distance(a);
    }
    libm::fabs((b.x - a.x) * (a.y - p.y) - (a.x - p.x) * (b.y - a.y)) / len
}
