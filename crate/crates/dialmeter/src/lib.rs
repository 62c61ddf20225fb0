//! File formats and command-line front end for `dialmeter-core`.
//!
//! Three line-delimited JSON formats carry data between the commands:
//! detections (one image per line), ground truth (one reading per line) and
//! predictions (the output of `read`). Evaluation results are written as a
//! single JSON document or as a flat `metric,value` CSV.

pub mod cli;
pub mod error;
pub mod formats;
pub mod report;

pub use error::{FormatError, Result};
