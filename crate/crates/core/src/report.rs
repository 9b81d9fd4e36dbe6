//! Experiment reports and their serialized forms.
//!
//! A report serializes to a JSON document with the fixed top-level keys
//! `config`, `fits`, `metrics`, `curves`, `timings`, `seed`. Every value in
//! the document is a pure function of the experiment configuration and seed,
//! so a repeated run emits byte-identical JSON; wall-clock measurements are
//! deliberately kept out of the document and reported on stderr by the CLI
//! instead. Curves can additionally be emitted as per-curve CSV files for
//! plotting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterVector;

/// A fitted model's parameters and the objective it was fitted under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub params: ParameterVector,
    pub objective: f64,
}

/// A named two-column series. `columns` names the CSV header; trajectory
/// curves use `("iteration", "value")`, line-fit curves use `("x", "y_pred")`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveData {
    pub columns: (String, String),
    pub points: Vec<(f64, f64)>,
}

impl CurveData {
    pub fn iterations(points: Vec<(u64, f64)>) -> Self {
        Self {
            columns: ("iteration".into(), "value".into()),
            points: points.into_iter().map(|(i, v)| (i as f64, v)).collect(),
        }
    }

    pub fn line_fit(points: Vec<(f64, f64)>) -> Self {
        Self {
            columns: ("x".into(), "y_pred".into()),
            points,
        }
    }

    fn is_iteration_indexed(&self) -> bool {
        self.columns.0 == "iteration"
    }
}

/// Seed and generator identification for reproducing randomized experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub value: u64,
    pub prng: String,
}

/// Deterministic effort counters per method (iterations, function
/// evaluations, QP steps).
pub type TimingCounters = BTreeMap<String, u64>;

/// Everything an experiment run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Echo of the experiment configuration, including dataset shape.
    pub config: serde_json::Value,
    /// Fitted parameters and objectives, keyed by method name.
    pub fits: BTreeMap<String, FitRecord>,
    /// Scalar evaluation metrics, keyed by `<method>_<metric>`.
    pub metrics: BTreeMap<String, f64>,
    /// Named series for plotting.
    pub curves: BTreeMap<String, CurveData>,
    /// Work counters, keyed by method name.
    pub timings: BTreeMap<String, TimingCounters>,
    /// Present when the experiment consumed randomness.
    pub seed: Option<SeedInfo>,
}

impl ExperimentReport {
    /// Canonical JSON document (pretty-printed, keys in fixed order).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Schema(format!("bad report JSON: {e}")))
    }
}

/// Output format selector for [`emit_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// The full report as `report.json`.
    Json,
    /// One CSV file per curve (`curve_<name>.csv` or `linefit_<name>.csv`).
    CsvCurves,
}

/// Writes the report to `out_dir` in the requested format and returns the
/// paths written. The directory is created if missing.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            std::fs::write(&path, report.to_json())?;
            written.push(path);
        }
        ReportFormat::CsvCurves => {
            for (name, curve) in &report.curves {
                let prefix = if curve.is_iteration_indexed() {
                    "curve"
                } else {
                    "linefit"
                };
                let path = out_dir.join(format!("{prefix}_{name}.csv"));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record([curve.columns.0.as_str(), curve.columns.1.as_str()])?;
                for &(a, b) in &curve.points {
                    let first = if curve.is_iteration_indexed() {
                        format!("{}", a as u64)
                    } else {
                        format!("{a}")
                    };
                    w.write_record([first, format!("{b}")])?;
                }
                w.flush()?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
