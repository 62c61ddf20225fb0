//! Synthetic multi-dial meters with exact ground truth.
//!
//! A meter is a consumption value spread over mechanically coupled dials.
//! Tilting the counter rotates the dial centers about the counter center
//! and shifts every pointer's apparent clock angle by the same amount.
//! Faults are drawn from one seeded stream in a fixed order per dial:
//! angle jitter, symmetry flip, drop, duplicate (with its own jitter).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dial::{
    angle_to_value, check_dial_count, decompose_consumption, orientation_pattern, true_reading,
    value_to_angle, Consumption, DialValue, FLOOR_GUARD,
};
use crate::error::{Error, Result};
use crate::geometry::{encode_angle, rotate_point, AngleDeg, BBox, Point};
use crate::pipeline::{DialDetection, DialPayload, MeterObservation};

pub const MAX_TILT_DEG: f64 = 45.0;
/// Spread of the near-boundary fractional part.
pub const BOUNDARY_SIGMA: f64 = 0.05;
/// Probability mass spread uniformly over all classes of a class-score payload.
pub const SCORE_SOFTENING: f64 = 0.01;
pub const DETECTION_CONFIDENCE: f64 = 0.99;
/// Confidence factor of an injected duplicate.
pub const DUPLICATE_CONFIDENCE_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PayloadKind {
    ClassScores,
    Value,
    SinCos,
    /// A class-score box and a sin/cos box on every dial.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layout {
    pub counter_center: Point,
    pub dial_pitch: f64,
    pub dial_box: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Layout {
            counter_center: Point::new(200.0, 200.0),
            dial_pitch: 60.0,
            dial_box: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeterSpec {
    pub dials: usize,
    pub consumption: Consumption,
    pub layout: Layout,
    pub tilt: f64,
    pub payload: PayloadKind,
}

impl MeterSpec {
    pub fn new(dials: usize, consumption: f64, payload: PayloadKind) -> Result<Self> {
        let spec = MeterSpec {
            dials,
            consumption: Consumption::new(consumption)?,
            layout: Layout::default(),
            tilt: 0.0,
            payload,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = layout;
        self
    }

    /// Image size implied by the layout: the counter sits in the middle.
    pub fn canvas(&self) -> (f64, f64) {
        (
            2.0 * self.layout.counter_center.x,
            2.0 * self.layout.counter_center.y,
        )
    }

    pub fn validate(&self) -> Result<()> {
        check_dial_count(self.dials)?;
        decompose_consumption(self.consumption, self.dials)?;
        let l = &self.layout;
        if !(l.dial_pitch.is_finite() && l.dial_pitch > 0.0) {
            return Err(Error::InvalidSpec("dial pitch must be positive"));
        }
        if !(l.dial_box.is_finite() && l.dial_box > 0.0) {
            return Err(Error::InvalidSpec("dial box must be positive"));
        }
        if l.dial_box > l.dial_pitch {
            return Err(Error::InvalidSpec("dial box must not exceed the pitch"));
        }
        if !(self.tilt.is_finite() && libm::fabs(self.tilt) <= MAX_TILT_DEG) {
            return Err(Error::InvalidSpec("tilt must lie in [-45, 45]"));
        }
        // Boxes stay on the canvas at any tilt in range.
        let half_span = (self.dials - 1) as f64 / 2.0 * l.dial_pitch;
        let reach = half_span + l.dial_box * core::f64::consts::FRAC_1_SQRT_2;
        let c = l.counter_center;
        if !(c.x.is_finite() && c.y.is_finite()) || reach > c.x.min(c.y) {
            return Err(Error::InvalidSpec("dial boxes do not fit the canvas"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Standard deviation of the pointer angle jitter, in degrees.
    pub angle_sigma: f64,
    pub flip_prob: f64,
    pub drop_prob: f64,
    pub dup_prob: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none(seed: u64) -> Self {
        NoiseModel {
            angle_sigma: 0.0,
            flip_prob: 0.0,
            drop_prob: 0.0,
            dup_prob: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle_sigma.is_finite() && self.angle_sigma >= 0.0) {
            return Err(Error::InvalidNoise("angle_sigma must be non-negative"));
        }
        for p in [self.flip_prob, self.drop_prob, self.dup_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise("probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Faults drawn for one dial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DialFault {
    pub jitter: f64,
    pub flipped: bool,
    pub dropped: bool,
    /// Extra jitter of the duplicate, when one was injected.
    pub duplicate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub observation: MeterObservation,
    pub gt_reading: String,
    pub gt_values: Vec<DialValue>,
    pub spec: MeterSpec,
    pub faults: Vec<DialFault>,
}

impl SyntheticSample {
    /// Re-renders the same meter and faults at another tilt.
    pub fn observe(&self, tilt_override: f64) -> MeterObservation {
        render(
            &self.spec,
            &self.gt_values,
            &self.faults,
            tilt_override,
            &self.observation.image_id,
        )
    }

    /// Boxes of every dial at the sample's tilt, dropped ones included.
    pub fn dial_boxes(&self) -> Vec<BBox> {
        (0..self.spec.dials)
            .map(|i| dial_box(&self.spec, i, self.spec.tilt))
            .collect()
    }

    /// Observer for [`crate::pipeline::rectify`]: rotating the photo by
    /// `rotation` degrees shows the meter at `spec.tilt + rotation`.
    pub fn reobserver(&self) -> impl FnMut(f64) -> MeterObservation + '_ {
        move |rotation| self.observe(self.spec.tilt + rotation)
    }
}

fn near_integer(v: f64) -> bool {
    libm::fabs(v - libm::round(v)) < FLOOR_GUARD
}

/// Draws a consumption value. The integer part is uniform; the fractional
/// part is, with probability `boundary_weight`, a normal around 0 with
/// σ = 0.05 truncated to (-0.5, 0.5) and folded into [0, 1), otherwise
/// uniform. No dial value lands within the floor guard of an integer.
pub fn sample_consumption<R: Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    boundary_weight: f64,
) -> Result<Consumption> {
    check_dial_count(k)?;
    if !(0.0..=1.0).contains(&boundary_weight) {
        return Err(Error::InvalidNoise("boundary_weight must lie in [0, 1]"));
    }
    let top = 10u64.pow(k as u32);
    let boundary = Normal::new(0.0, BOUNDARY_SIGMA).expect("valid sigma");
    loop {
        let whole = rng.random_range(0..top);
        let frac = if rng.random::<f64>() < boundary_weight {
            let x: f64 = boundary.sample(rng);
            if libm::fabs(x) >= 0.5 {
                continue;
            }
            if x < 0.0 {
                1.0 + x
            } else {
                x
            }
        } else {
            rng.random::<f64>()
        };
        let c = whole as f64 + frac;
        if c >= top as f64 {
            continue;
        }
        let cons = Consumption::new(c)?;
        let values = decompose_consumption(cons, k)?;
        if values.iter().any(|v| near_integer(v.get())) {
            continue;
        }
        return Ok(cons);
    }
}

fn draw_faults<R: Rng + ?Sized>(rng: &mut R, noise: &NoiseModel, k: usize) -> Result<Vec<DialFault>> {
    let jitter = Normal::new(0.0, noise.angle_sigma).map_err(|_| Error::InvalidNoise("angle_sigma"))?;
    Ok((0..k)
        .map(|_| {
            let j = jitter.sample(rng);
            let flipped = rng.random::<f64>() < noise.flip_prob;
            let dropped = rng.random::<f64>() < noise.drop_prob;
            let dup = rng.random::<f64>() < noise.dup_prob;
            let dup_jitter = jitter.sample(rng);
            DialFault {
                jitter: j,
                flipped,
                dropped,
                duplicate: dup.then_some(dup_jitter),
            }
        })
        .collect())
}

fn softened_scores(digit: usize) -> [f64; 10] {
    let mut s = [SCORE_SOFTENING / 10.0; 10];
    s[digit] += 1.0 - SCORE_SOFTENING;
    s
}

fn payload_boxes(
    kind: PayloadKind,
    bbox: BBox,
    angle: AngleDeg,
    o: crate::dial::Orientation,
    confidence: f64,
    out: &mut Vec<DialDetection>,
) {
    let value = angle_to_value(angle, o);
    let scores = DialPayload::ClassScores(softened_scores(value.digit().get() as usize));
    let push = |payload, out: &mut Vec<DialDetection>| {
        out.push(DialDetection {
            bbox,
            payload,
            confidence,
        })
    };
    match kind {
        PayloadKind::ClassScores => push(scores, out),
        PayloadKind::Value => push(DialPayload::Value(value), out),
        PayloadKind::SinCos => push(DialPayload::SinCos(encode_angle(angle)), out),
        PayloadKind::Paired => {
            push(scores, out);
            push(DialPayload::SinCos(encode_angle(angle)), out);
        }
    }
}

fn dial_box(spec: &MeterSpec, index: usize, tilt: f64) -> BBox {
    let layout = &spec.layout;
    let offset = (index as f64 - (spec.dials - 1) as f64 / 2.0) * layout.dial_pitch;
    let upright = Point::new(layout.counter_center.x + offset, layout.counter_center.y);
    let center = rotate_point(upright, layout.counter_center, tilt);
    BBox {
        cx: center.x,
        cy: center.y,
        w: layout.dial_box,
        h: layout.dial_box,
    }
}

fn render(
    spec: &MeterSpec,
    values: &[DialValue],
    faults: &[DialFault],
    tilt: f64,
    image_id: &str,
) -> MeterObservation {
    let (width, height) = spec.canvas();
    let orientations = orientation_pattern(spec.dials).expect("validated dial count");
    let mut dials = Vec::new();
    for (i, ((&v, &o), fault)) in values.iter().zip(&orientations).zip(faults).enumerate() {
        if fault.dropped {
            continue;
        }
        let bbox = dial_box(spec, i, tilt);
        let mut local = value_to_angle(v, o);
        if fault.jitter != 0.0 {
            local = local.shifted(fault.jitter);
        }
        if fault.flipped {
            local = AngleDeg::ZERO.shifted(360.0 - local.degrees());
        }
        let apparent = if tilt != 0.0 { local.shifted(tilt) } else { local };
        payload_boxes(spec.payload, bbox, apparent, o, DETECTION_CONFIDENCE, &mut dials);
        if let Some(extra) = fault.duplicate {
            payload_boxes(
                spec.payload,
                bbox,
                apparent.shifted(extra),
                o,
                DETECTION_CONFIDENCE * DUPLICATE_CONFIDENCE_FACTOR,
                &mut dials,
            );
        }
    }
    MeterObservation {
        image_id: image_id.into(),
        width,
        height,
        dials,
    }
}

/// Renders `spec` with faults drawn from `noise`.
pub fn generate(spec: &MeterSpec, noise: &NoiseModel) -> Result<SyntheticSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    generate_with_rng(spec, noise, &mut rng, &format!("sim-{}", noise.seed))
}

fn generate_with_rng<R: Rng + ?Sized>(
    spec: &MeterSpec,
    noise: &NoiseModel,
    rng: &mut R,
    image_id: &str,
) -> Result<SyntheticSample> {
    spec.validate()?;
    noise.validate()?;
    let gt_values = decompose_consumption(spec.consumption, spec.dials)?;
    let gt_reading = true_reading(spec.consumption, spec.dials)?;
    let faults = draw_faults(rng, noise, spec.dials)?;
    let observation = render(spec, &gt_values, &faults, spec.tilt, image_id);
    Ok(SyntheticSample {
        observation,
        gt_reading,
        gt_values,
        spec: *spec,
        faults,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DialCountChoice {
    Four,
    Five,
    Mixed,
}

/// Parameters of a simulated batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchConfig {
    pub dials: DialCountChoice,
    pub boundary_weight: f64,
    /// Tilts are drawn uniformly from `[-tilt_max, tilt_max]`.
    pub tilt_max: f64,
    pub payload: PayloadKind,
    pub layout: Layout,
    pub angle_sigma: f64,
    pub flip_prob: f64,
    pub drop_prob: f64,
    pub dup_prob: f64,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig {
            dials: DialCountChoice::Mixed,
            boundary_weight: 0.5,
            tilt_max: 0.0,
            payload: PayloadKind::SinCos,
            layout: Layout::default(),
            angle_sigma: 0.0,
            flip_prob: 0.0,
            drop_prob: 0.0,
            dup_prob: 0.0,
            seed: 0,
        }
    }
}

/// Independent stream for sample `index` of a batch seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample `index` of a batch. Each sample owns its stream, so samples can be
/// generated independently and in any order.
pub fn generate_indexed(config: &BatchConfig, index: u64) -> Result<SyntheticSample> {
    if !(config.tilt_max.is_finite() && (0.0..=MAX_TILT_DEG).contains(&config.tilt_max)) {
        return Err(Error::InvalidSpec("tilt_max must lie in [0, 45]"));
    }
    let mut rng = sample_rng(config.seed, index);
    let dials = match config.dials {
        DialCountChoice::Four => 4,
        DialCountChoice::Five => 5,
        DialCountChoice::Mixed => {
            if rng.random::<bool>() {
                5
            } else {
                4
            }
        }
    };
    let consumption = sample_consumption(&mut rng, dials, config.boundary_weight)?;
    let tilt = if config.tilt_max > 0.0 {
        rng.random_range(-config.tilt_max..=config.tilt_max)
    } else {
        0.0
    };
    let spec = MeterSpec {
        dials,
        consumption,
        layout: config.layout,
        tilt,
        payload: config.payload,
    };
    let noise = NoiseModel {
        angle_sigma: config.angle_sigma,
        flip_prob: config.flip_prob,
        drop_prob: config.drop_prob,
        dup_prob: config.dup_prob,
        seed: rng.next_u64(),
    };
    generate_with_rng(&spec, &noise, &mut rng, &format!("sim-{:05}", index))
}

pub fn generate_batch(config: &BatchConfig, count: usize) -> Result<Vec<SyntheticSample>> {
    (0..count as u64).map(|i| generate_indexed(config, i)).collect()
}
