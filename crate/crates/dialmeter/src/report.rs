//! Evaluation report document, written as JSON or as a flat CSV.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dialmeter_core::metrics::ErrorBucket;
use dialmeter_core::MetricsReport;
use serde::{Deserialize, Serialize};

use crate::error::{FormatError, Result};
use crate::formats::ThresholdsDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Settings the report was produced with. Fields that were not known to
/// the evaluator are written as `null`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub thresholds: Option<ThresholdsDoc>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
    pub tolerances: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub n: usize,
    pub mrr: f64,
    pub drr: f64,
    pub mae: f64,
    /// Keyed by tolerance in kWh.
    pub tolerant_mrr: BTreeMap<u64, f64>,
    /// Keyed by 1-based digit position.
    pub position_errors: BTreeMap<usize, f64>,
    #[serde(with = "histogram")]
    pub magnitude_histogram: BTreeMap<ErrorBucket, usize>,
    pub unequal_length_count: usize,
    pub config: ReportConfig,
}

mod histogram {
    use super::*;
    use serde::de::Error as _;
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &BTreeMap<ErrorBucket, usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(h.len()))?;
        for (b, n) in h {
            map.serialize_entry(b.label(), n)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BTreeMap<ErrorBucket, usize>, D::Error> {
        let raw: BTreeMap<String, usize> = BTreeMap::deserialize(d)?;
        raw.into_iter()
            .map(|(k, v)| {
                ErrorBucket::from_label(&k)
                    .map(|b| (b, v))
                    .ok_or_else(|| D::Error::custom(format!("unknown error bucket {k:?}")))
            })
            .collect()
    }
}

impl ReportFile {
    pub fn new(report: &MetricsReport, config: ReportConfig) -> Self {
        ReportFile {
            n: report.n_meters,
            mrr: report.mrr,
            drr: report.drr,
            mae: report.mae,
            tolerant_mrr: report.tolerant_mrr.clone(),
            position_errors: report.position_errors.clone(),
            magnitude_histogram: report.magnitude_histogram.clone(),
            unequal_length_count: report.unequal_length_count,
            config,
        }
    }

    /// Flat `(metric, value)` rows with dotted keys for nested entries.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("n".to_string(), self.n.to_string()),
            ("mrr".to_string(), self.mrr.to_string()),
            ("drr".to_string(), self.drr.to_string()),
            ("mae".to_string(), self.mae.to_string()),
        ];
        for (t, v) in &self.tolerant_mrr {
            rows.push((format!("tolerant_mrr.{t}"), v.to_string()));
        }
        for (p, v) in &self.position_errors {
            rows.push((format!("position_errors.{p}"), v.to_string()));
        }
        for (b, n) in &self.magnitude_histogram {
            rows.push((format!("magnitude_histogram.{b}"), n.to_string()));
        }
        rows.push(("unequal_length_count".to_string(), self.unequal_length_count.to_string()));
        let opt = |v: Option<String>| v.unwrap_or_default();
        if let Some(t) = &self.config.thresholds {
            rows.push(("config.thresholds.carry_up.cur_frac_min".into(), t.carry_up.cur_frac_min.to_string()));
            rows.push(("config.thresholds.carry_up.next_val_max".into(), t.carry_up.next_val_max.to_string()));
            rows.push(("config.thresholds.carry_up.enabled".into(), t.carry_up.enabled.to_string()));
            rows.push(("config.thresholds.carry_down.cur_frac_max".into(), t.carry_down.cur_frac_max.to_string()));
            rows.push(("config.thresholds.carry_down.next_val_min".into(), t.carry_down.next_val_min.to_string()));
            rows.push(("config.thresholds.carry_down.enabled".into(), t.carry_down.enabled.to_string()));
        }
        rows.push(("config.mode".into(), opt(self.config.mode.clone())));
        rows.push(("config.seed".into(), opt(self.config.seed.map(|s| s.to_string()))));
        let tol: Vec<String> = self.config.tolerances.iter().map(u64::to_string).collect();
        rows.push(("config.tolerances".into(), tol.join(" ")));
        rows
    }

    /// Names the first non-finite number, if any.
    pub fn check_finite(&self) -> Result<()> {
        let bad = |field: String| Err(FormatError::validation(0, field, "must be finite"));
        for (name, v) in [("mrr", self.mrr), ("drr", self.drr), ("mae", self.mae)] {
            if !v.is_finite() {
                return bad(name.to_string());
            }
        }
        for (t, v) in &self.tolerant_mrr {
            if !v.is_finite() {
                return bad(format!("tolerant_mrr.{t}"));
            }
        }
        for (p, v) in &self.position_errors {
            if !v.is_finite() {
                return bad(format!("position_errors.{p}"));
            }
        }
        if let Some(t) = &self.config.thresholds {
            let fields = [
                ("carry_up.cur_frac_min", t.carry_up.cur_frac_min),
                ("carry_up.next_val_max", t.carry_up.next_val_max),
                ("carry_down.cur_frac_max", t.carry_down.cur_frac_max),
                ("carry_down.next_val_min", t.carry_down.next_val_min),
            ];
            for (name, v) in fields {
                if !v.is_finite() {
                    return bad(format!("config.thresholds.{name}"));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        Ok(text)
    }

    pub fn to_csv(&self) -> Result<String> {
        self.check_finite()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["metric", "value"]).expect("in-memory write");
        for (k, v) in self.rows() {
            w.write_record([k, v]).expect("in-memory write");
        }
        Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
    }
}

pub fn write_report(report: &ReportFile, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Parse {
        line: e.line(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dialmeter_core::ReadingPair;

    fn sample() -> ReportFile {
        let pairs: Vec<ReadingPair> = [("04189", "04189"), ("04188", "04189"), ("0418", "04189")]
            .iter()
            .map(|(p, g)| ReadingPair::new(*p, *g).unwrap())
            .collect();
        let m = MetricsReport::compute(&pairs, &[0, 1, 10]).unwrap();
        ReportFile::new(
            &m,
            ReportConfig {
                thresholds: Some((&dialmeter_core::CorrectionThresholds::default()).into()),
                mode: Some("regression".into()),
                seed: Some(7),
                tolerances: vec![0, 1, 10],
            },
        )
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = sample();
        write_report(&r, &path, ReportFormat::Json).unwrap();
        assert_eq!(read_report(&path).unwrap(), r);
    }

    #[test]
    fn csv_has_one_mrr_row() {
        let csv = sample().to_csv().unwrap();
        assert_eq!(csv.lines().filter(|l| l.starts_with("mrr,")).count(), 1);
        assert!(csv.lines().any(|l| l == "magnitude_histogram.1,1"));
    }

    #[test]
    fn nan_is_refused_before_writing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut r = sample();
        r.tolerant_mrr.insert(1, f64::NAN);
        match write_report(&r, &path, ReportFormat::Csv) {
            Err(FormatError::Validation { field, .. }) => assert_eq!(field, "tolerant_mrr.1"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(!path.exists());
    }
}
