//! Result emission. One row type feeds every format:
//!
//! * `results.csv` — fixed header, one row per result, numeric cells printed
//!   as shortest round-trip decimals (re-parsing gives back the same bits);
//! * `results.json` — an array of objects mirroring the CSV columns;
//! * `plot-data.csv` — (x, y, y_lo, y_hi, bound) tuples in axis order.
//!
//! Every output directory also receives `manifest.json` and `config.json`
//! (the effective configuration, defaults applied).

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::ConfigFile;
use crate::manifest::RunManifest;

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv write failed for {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    PlotData,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// Marker row: the sweep stopped early and rows after this point are
    /// missing. Carries the axis value of the failed point.
    Truncated,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ok => "ok",
            Self::Truncated => "truncated",
        })
    }
}

/// One emitted result. Column order is part of the output contract:
/// axis values first, then estimates with their confidence interval, then the
/// closed-form bounds, then clamp flags, then the seed and row status.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub axis: Option<String>,
    pub axis_value: Option<f64>,
    pub d: usize,
    pub log_n: f64,
    pub p: f64,
    pub epsilon: f64,
    pub zeta: f64,
    pub estimator: String,
    pub estimate: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub deviation_bound: Option<f64>,
    pub instability_lower_bound: Option<f64>,
    pub ez_ratio_bound: Option<f64>,
    pub stable_volume_bound: Option<f64>,
    pub largeness_log_ratio: Option<f64>,
    pub deviation_bound_clamped: Option<bool>,
    pub stable_volume_clamped: Option<bool>,
    pub seed: u64,
    pub status: RowStatus,
}

pub const CSV_HEADER: [&str; 20] = [
    "axis",
    "axis_value",
    "d",
    "log_n",
    "p",
    "epsilon",
    "zeta",
    "estimator",
    "estimate",
    "ci_low",
    "ci_high",
    "deviation_bound",
    "instability_lower_bound",
    "ez_ratio_bound",
    "stable_volume_bound",
    "largeness_log_ratio",
    "deviation_bound_clamped",
    "stable_volume_clamped",
    "seed",
    "status",
];

/// Shortest decimal that round-trips to the same f64 (Rust's `{}` formatting).
fn cell(value: Option<f64>) -> String {
    value.map(|v| format!("{v}")).unwrap_or_default()
}

fn flag(value: Option<bool>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

impl ResultRow {
    fn csv_record(&self) -> [String; 20] {
        [
            self.axis.clone().unwrap_or_default(),
            cell(self.axis_value),
            self.d.to_string(),
            format!("{}", self.log_n),
            format!("{}", self.p),
            format!("{}", self.epsilon),
            format!("{}", self.zeta),
            self.estimator.clone(),
            cell(self.estimate),
            cell(self.ci_low),
            cell(self.ci_high),
            cell(self.deviation_bound),
            cell(self.instability_lower_bound),
            cell(self.ez_ratio_bound),
            cell(self.stable_volume_bound),
            cell(self.largeness_log_ratio),
            flag(self.deviation_bound_clamped),
            flag(self.stable_volume_clamped),
            self.seed.to_string(),
            self.status.to_string(),
        ]
    }

    /// The plotting tuple: x is the axis value (the dimension when no sweep
    /// axis exists), y the estimate (falling back to the bound for bounds-only
    /// rows), y_lo/y_hi the interval, bound the closed-form line matching the
    /// row's estimator.
    fn plot_tuple(&self) -> [String; 5] {
        let x = self.axis_value.unwrap_or(self.d as f64);
        let bound = match self.estimator.as_str() {
            "deviation" => self.deviation_bound,
            "z-ratio" => self.ez_ratio_bound,
            "stable-fraction" => self.stable_volume_bound,
            // Only ω-axis rows carry the largeness ratio; everything else
            // plots against the instability lower bound.
            _ => self
                .largeness_log_ratio
                .or(self.instability_lower_bound)
                .or(self.deviation_bound),
        };
        let y = self.estimate.or(bound);
        [
            format!("{x}"),
            cell(y),
            cell(self.ci_low),
            cell(self.ci_high),
            cell(bound),
        ]
    }
}

pub struct OutputPaths {
    pub results: PathBuf,
    pub manifest: PathBuf,
    pub config: PathBuf,
}

/// Writes results in the requested format plus `manifest.json` and
/// `config.json`. Returns the paths written. An empty row set still writes a
/// header-only CSV (or an empty JSON array).
pub fn emit_results(
    out_dir: &Path,
    format: OutputFormat,
    rows: &[ResultRow],
    manifest: &RunManifest,
    config: &ConfigFile,
) -> Result<OutputPaths, EmitError> {
    std::fs::create_dir_all(out_dir).map_err(|source| EmitError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let results = match format {
        OutputFormat::Csv => write_csv(out_dir, rows)?,
        OutputFormat::Json => write_json(out_dir, rows)?,
        OutputFormat::PlotData => write_plot_data(out_dir, rows)?,
    };
    let manifest_path = out_dir.join("manifest.json");
    write_pretty_json(&manifest_path, manifest)?;
    let config_path = out_dir.join("config.json");
    write_pretty_json(&config_path, config)?;
    Ok(OutputPaths {
        results,
        manifest: manifest_path,
        config: config_path,
    })
}

fn write_csv(out_dir: &Path, rows: &[ResultRow]) -> Result<PathBuf, EmitError> {
    let path = out_dir.join("results.csv");
    let as_string = |source| EmitError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::Writer::from_path(&path).map_err(as_string)?;
    writer.write_record(CSV_HEADER).map_err(as_string)?;
    for row in rows {
        writer.write_record(row.csv_record()).map_err(as_string)?;
    }
    writer.flush().map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn write_json(out_dir: &Path, rows: &[ResultRow]) -> Result<PathBuf, EmitError> {
    let path = out_dir.join("results.json");
    write_pretty_json(&path, rows)?;
    Ok(path)
}

fn write_plot_data(out_dir: &Path, rows: &[ResultRow]) -> Result<PathBuf, EmitError> {
    let path = out_dir.join("plot-data.csv");
    let as_string = |source| EmitError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::Writer::from_path(&path).map_err(as_string)?;
    writer
        .write_record(["x", "y", "y_lo", "y_hi", "bound"])
        .map_err(as_string)?;
    for row in rows.iter().filter(|r| r.status == RowStatus::Ok) {
        writer.write_record(row.plot_tuple()).map_err(as_string)?;
    }
    writer.flush().map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

fn write_pretty_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), EmitError> {
    let text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
    std::fs::write(path, text + "\n").map_err(|source| EmitError::Io {
        path: path.display().to_string(),
        source,
    })
}
