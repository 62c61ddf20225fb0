//! Command-line surface: `simulate`, `read`, `calibrate` and `evaluate`.
//!
//! Failures are reported as one JSON object on stderr. Exit codes: 0 on
//! success, 1 on parse, validation or IO errors, 2 on usage errors.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use dialmeter_core::correction::calibrate;
use dialmeter_core::pipeline::{assemble_reading, read_dials};
use dialmeter_core::simulator::{generate_batch, BatchConfig, DialCountChoice};
use dialmeter_core::{
    CalibrationSample, CorrectionThresholds, MetricsReport, PayloadKind, PipelineMode, ReadingPair,
};
use serde_json::json;

use crate::error::FormatError;
use crate::formats::{
    parse_detections, parse_ground_truth, parse_predictions, read_grid, read_thresholds,
    write_detections, write_ground_truth, write_predictions, write_thresholds, GroundTruth,
    PredictionRecord,
};
use crate::report::{write_report, ReportConfig, ReportFile, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "dialmeter", version, about = "Read, calibrate and evaluate dial meter readings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DialsArg {
    #[value(name = "4")]
    Four,
    #[value(name = "5")]
    Five,
    Mixed,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PayloadArg {
    ClassScores,
    Value,
    Sincos,
    Paired,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Detection,
    Regression,
    Hybrid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic detections and the matching ground truth.
    Simulate {
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value = "mixed")]
        dials: DialsArg,
        /// Angle noise in degrees.
        #[arg(long, default_value_t = 0.0)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 0.0)]
        flip_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        drop_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        dup_prob: f64,
        #[arg(long, default_value_t = 0.0)]
        tilt_max: f64,
        #[arg(long, default_value_t = 0.5)]
        boundary_weight: f64,
        #[arg(long, value_enum, default_value = "sincos")]
        payload: PayloadArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_detections: PathBuf,
        #[arg(long)]
        out_gt: PathBuf,
    },
    /// Assemble a reading for every image in a detections file.
    Read {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long, value_enum, default_value = "regression")]
        mode: ModeArg,
        /// Threshold document; defaults are used when omitted.
        #[arg(long)]
        thresholds: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search correction thresholds against ground truth.
    Calibrate {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Grid document; the default lattice is used when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare predictions with ground truth and write a report.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Tolerance in kWh for the tolerant recognition rate.
        #[arg(long, default_value_t = 1)]
        tolerance: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
}

/// A failure of one command.
#[derive(Debug)]
pub struct CliError {
    pub error: FormatError,
    pub image_id: Option<String>,
}

impl From<FormatError> for CliError {
    fn from(error: FormatError) -> Self {
        CliError { error, image_id: None }
    }
}

impl CliError {
    fn for_image(error: impl Into<FormatError>, image_id: &str) -> Self {
        CliError {
            error: error.into(),
            image_id: Some(image_id.to_string()),
        }
    }

    /// Single-line JSON rendering for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = json!({
            "error": self.error.kind(),
            "message": self.error.to_string(),
        });
        if let Some(line) = self.error.line().filter(|&l| l > 0) {
            v["line"] = json!(line);
        }
        if let FormatError::Validation { field, .. } = &self.error {
            v["field"] = json!(field);
        }
        if let Some(id) = &self.image_id {
            v["image_id"] = json!(id);
        }
        v.to_string()
    }
}

type CmdResult = std::result::Result<(), CliError>;

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Diagnostics go to `stderr`, help and version text to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            let line = json!({"error": "usage", "message": first});
            let _ = writeln!(stderr, "{line}");
            return 2;
        }
    };
    match execute(cli.command, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json_line());
            1
        }
    }
}

fn execute(command: Command, stderr: &mut dyn Write) -> CmdResult {
    match command {
        Command::Simulate {
            count,
            dials,
            noise_sigma,
            flip_prob,
            drop_prob,
            dup_prob,
            tilt_max,
            boundary_weight,
            payload,
            seed,
            out_detections,
            out_gt,
        } => {
            let config = BatchConfig {
                dials: match dials {
                    DialsArg::Four => DialCountChoice::Four,
                    DialsArg::Five => DialCountChoice::Five,
                    DialsArg::Mixed => DialCountChoice::Mixed,
                },
                boundary_weight,
                tilt_max,
                payload: match payload {
                    PayloadArg::ClassScores => PayloadKind::ClassScores,
                    PayloadArg::Value => PayloadKind::Value,
                    PayloadArg::Sincos => PayloadKind::SinCos,
                    PayloadArg::Paired => PayloadKind::Paired,
                },
                angle_sigma: noise_sigma,
                flip_prob,
                drop_prob,
                dup_prob,
                seed,
                ..BatchConfig::default()
            };
            simulate(&config, count, &out_detections, &out_gt)
        }
        Command::Read {
            detections,
            mode,
            thresholds,
            out,
        } => {
            let thresholds = match thresholds {
                Some(p) => read_thresholds(&p)?,
                None => CorrectionThresholds::default(),
            };
            read(&detections, pipeline_mode(mode), &thresholds, &out, stderr)
        }
        Command::Calibrate {
            detections,
            gt,
            grid,
            out,
        } => {
            let grid = match grid {
                Some(p) => read_grid(&p)?,
                None => Default::default(),
            };
            let samples = calibration_samples(&detections, &gt)?;
            let t = calibrate(&samples, &grid).map_err(FormatError::from)?;
            write_thresholds(&out, &t)?;
            Ok(())
        }
        Command::Evaluate {
            pred,
            gt,
            tolerance,
            out,
            format,
        } => {
            let format = match format {
                FormatArg::Json => ReportFormat::Json,
                FormatArg::Csv => ReportFormat::Csv,
            };
            evaluate(&pred, &gt, tolerance, &out, format)
        }
    }
}

fn pipeline_mode(m: ModeArg) -> PipelineMode {
    match m {
        ModeArg::Detection => PipelineMode::Detection,
        ModeArg::Regression => PipelineMode::Regression,
        ModeArg::Hybrid => PipelineMode::Hybrid,
    }
}

fn simulate(config: &BatchConfig, count: usize, det_path: &Path, gt_path: &Path) -> CmdResult {
    let samples = generate_batch(config, count).map_err(FormatError::from)?;
    let observations: Vec<_> = samples.iter().map(|s| s.observation.clone()).collect();
    let truth: Vec<GroundTruth> = samples
        .iter()
        .map(|s| GroundTruth {
            image_id: s.observation.image_id.clone(),
            reading: s.gt_reading.clone(),
            dials: s.dial_boxes().into_iter().zip(s.gt_values.iter().copied()).collect(),
            line: 0,
        })
        .collect();
    write_detections(det_path, &observations)?;
    write_ground_truth(gt_path, &truth)?;
    Ok(())
}

fn read(
    det_path: &Path,
    mode: PipelineMode,
    thresholds: &CorrectionThresholds,
    out: &Path,
    stderr: &mut dyn Write,
) -> CmdResult {
    let parsed = parse_detections(det_path)?;
    let mut records = Vec::with_capacity(parsed.len());
    for p in parsed {
        let id = &p.observation.image_id;
        for w in &p.warnings {
            let _ = writeln!(stderr, "{}", json!({"warning": w, "image_id": id, "line": p.line}));
        }
        let reading = assemble_reading(&p.observation, mode, thresholds, None)
            .map_err(|e| CliError::for_image(e, id))?;
        let mut rec = PredictionRecord::from_reading(id, &reading);
        rec.warnings.extend(p.warnings.iter().cloned());
        records.push(rec);
    }
    write_predictions(out, &records)?;
    Ok(())
}

fn calibration_samples(det_path: &Path, gt_path: &Path) -> Result<Vec<CalibrationSample>, CliError> {
    let truth: HashMap<String, String> = parse_ground_truth(gt_path)?
        .into_iter()
        .map(|g| (g.image_id, g.reading))
        .collect();
    let mut samples = Vec::new();
    for p in parse_detections(det_path)? {
        let id = &p.observation.image_id;
        let gt = truth.get(id).ok_or_else(|| {
            CliError::for_image(
                FormatError::validation(p.line, "image_id", format!("no ground truth for {id:?}")),
                id,
            )
        })?;
        let readout = read_dials(&p.observation, PipelineMode::Regression, None)
            .map_err(|e| CliError::for_image(e, id))?;
        samples.push(CalibrationSample::new(readout.values, gt.clone()));
    }
    Ok(samples)
}

fn evaluate(pred: &Path, gt: &Path, tolerance: u64, out: &Path, format: ReportFormat) -> CmdResult {
    let predictions: HashMap<String, String> = parse_predictions(pred)?
        .into_iter()
        .map(|p| (p.image_id, p.reading))
        .collect();
    let truth = parse_ground_truth(gt)?;
    let mut pairs = Vec::with_capacity(truth.len());
    for g in &truth {
        let p = predictions.get(&g.image_id).ok_or_else(|| {
            CliError::for_image(
                FormatError::validation(g.line, "image_id", format!("no prediction for {:?}", g.image_id)),
                &g.image_id,
            )
        })?;
        pairs.push(ReadingPair::new(p.clone(), g.reading.clone()).map_err(|e| CliError::for_image(e, &g.image_id))?);
    }
    let mut tolerances = vec![0, 1, tolerance];
    tolerances.sort_unstable();
    tolerances.dedup();
    let metrics = MetricsReport::compute(&pairs, &tolerances).map_err(FormatError::from)?;
    let report = ReportFile::new(
        &metrics,
        ReportConfig {
            thresholds: None,
            mode: None,
            seed: None,
            tolerances,
        },
    );
    write_report(&report, out, format)?;
    Ok(())
}
