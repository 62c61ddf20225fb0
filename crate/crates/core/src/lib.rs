//! Post-processing and evaluation for pointer-type (dial) energy meters.
//!
//! The crate works on detector output, not pixels. A [`pipeline::MeterObservation`]
//! holds the dial boxes and payloads found on one image; the pipeline turns it
//! into a [`pipeline::Reading`], the correction module repairs inconsistent
//! neighbouring dials, and the metrics module scores readings against ground
//! truth. The simulator produces mechanically consistent meters with exact
//! ground truth, which the tests use as an oracle.
//!
//! Stages:
//!
//! 1. **geometry** – clock angles, the sine/cosine angle codec, boxes, rotation.
//! 2. **dial** – orientation pattern, value/angle mapping, mirror relabeling,
//!    mechanical decomposition of a consumption value into dial positions.
//! 3. **pipeline** – NMS, ordering, tilt rectification and reading assembly.
//! 4. **correction** – cross-dial carry correction and threshold calibration.
//! 5. **metrics** – MRR, DRR, MAE, tolerant MRR, error analytics, mAP, MSE.
//! 6. **simulator** – seeded synthetic meters with fault injection.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod correction;
pub mod dial;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod simulator;

pub use correction::{CalibrationGrid, CalibrationSample, CorrectionThresholds};
pub use dial::{Consumption, DialValue, Digit, Orientation};
pub use error::{Error, Result};
pub use geometry::{AngleDeg, BBox, Point, UnitVec};
pub use metrics::{MetricsReport, ReadingPair};
pub use pipeline::{DialDetection, DialPayload, MeterObservation, PipelineMode, Reading};
pub use simulator::{MeterSpec, NoiseModel, PayloadKind, SyntheticSample};
