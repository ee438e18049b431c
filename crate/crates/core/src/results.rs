//! Result files written by `scan` and `sweep`, and the `report` summary.
//!
//! Every run writes a deterministic JSON payload (`<stem>.json`), delimited
//! plot data (`<stem>_heatmap.csv` or `<stem>_curves.csv`), and a timing
//! sidecar (`<stem>.timing.json`) that holds everything wall-clock related.
//!
//! Curve CSV columns, in order:
//! `mode,attenuation_db,alpha,interpolated,best_metric,beta2,delay,beta1,ridge_lambda`.
//! `beta2,delay` are filled for delayed-input rows, `beta1,ridge_lambda` for
//! standard-no-delay rows; the other pair is left empty.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::optimizer::{BestParams, GridResult, MetricKind, PresetName, SweepCurve};
use crate::{Error, Result};

pub const RESULT_FORMAT_VERSION: u32 = 1;

pub const CURVE_COLUMNS: &str = "mode,attenuation_db,alpha,interpolated,best_metric,beta2,delay,beta1,ridge_lambda";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub task: PresetName,
    pub alpha: f64,
    pub config: ExperimentConfig,
    pub grid: GridResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub task: PresetName,
    pub config: ExperimentConfig,
    pub curves: Vec<SweepCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResultPayload {
    Scan(ScanRecord),
    Sweep(SweepRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub payload: ResultPayload,
}

impl ResultFile {
    pub fn new(payload: ResultPayload) -> Self {
        Self {
            format_version: RESULT_FORMAT_VERSION,
            payload,
        }
    }

    pub fn task(&self) -> PresetName {
        match &self.payload {
            ResultPayload::Scan(s) => s.task,
            ResultPayload::Sweep(s) => s.task,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Wall-clock information, kept apart from the deterministic payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSidecar {
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cell_timings_ms: Vec<Vec<f64>>,
}

impl TimingSidecar {
    pub fn now(started: std::time::SystemTime, elapsed: std::time::Duration) -> Self {
        Self {
            started_unix_s: started
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            elapsed_s: elapsed.as_secs_f64(),
            cell_timings_ms: Vec::new(),
        }
    }
}

/// Heatmap table: one row per delay, one column per β₂.
pub fn heatmap_csv(grid: &GridResult) -> String {
    let mut s = String::from("d\\beta2");
    for b in &grid.beta2_axis {
        let _ = write!(s, ",{b}");
    }
    s.push('\n');
    for (d, row) in grid.delay_axis.iter().zip(&grid.surface) {
        let _ = write!(s, "{d}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn curves_csv(curves: &[SweepCurve]) -> String {
    let mut s = String::from(CURVE_COLUMNS);
    s.push('\n');
    for c in curves {
        for p in &c.points {
            let (b2, d, b1, l) = match p.best_params {
                BestParams::Delay { beta2, delay } => (beta2.to_string(), delay.to_string(), String::new(), String::new()),
                BestParams::Standard { beta1, ridge_lambda } => {
                    (String::new(), String::new(), beta1.to_string(), ridge_lambda.to_string())
                }
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{b2},{d},{b1},{l}",
                c.mode, p.attenuation_db, p.alpha, p.interpolated, p.best_metric
            );
        }
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn sidecar_path(json: &Path) -> PathBuf {
    json.with_extension("timing.json")
}

/// Writes `<dir>/<stem>.json`, the plot table and the timing sidecar.
/// Returns the paths written.
pub fn write_result(dir: &Path, stem: &str, file: &ResultFile, timing: &TimingSidecar) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(format!("{stem}.json"));
    write_file(&json, &file.to_json()?)?;
    let (table_path, table) = match &file.payload {
        ResultPayload::Scan(s) => (dir.join(format!("{stem}_heatmap.csv")), heatmap_csv(&s.grid)),
        ResultPayload::Sweep(s) => (dir.join(format!("{stem}_curves.csv")), curves_csv(&s.curves)),
    };
    write_file(&table_path, &table)?;
    let side = sidecar_path(&json);
    let mut t = serde_json::to_string_pretty(timing)?;
    t.push('\n');
    write_file(&side, &t)?;
    Ok(vec![json, table_path, side])
}

pub fn read_result(path: &Path) -> Result<ResultFile> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: serde_json::Value = serde_json::from_str(&s).map_err(|e| Error::IncompatibleResult {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    match v.get("format_version").and_then(|x| x.as_u64()) {
        Some(v) if v == u64::from(RESULT_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::IncompatibleResult {
                path: path.to_path_buf(),
                reason: format!("format version {v}, this build reads {RESULT_FORMAT_VERSION}"),
            })
        }
        None => {
            return Err(Error::IncompatibleResult {
                path: path.to_path_buf(),
                reason: "missing format_version".into(),
            })
        }
    }
    serde_json::from_value(v).map_err(|e| Error::IncompatibleResult {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub task: PresetName,
    pub mode: String,
    pub attenuation_db: f64,
    pub metric: MetricKind,
    pub best_metric: f64,
    pub best_params: String,
    pub runtime_s: Option<f64>,
}

fn params_label(p: &BestParams) -> String {
    match *p {
        BestParams::Delay { beta2, delay } => format!("beta2={beta2} d={delay}"),
        BestParams::Standard { beta1, ridge_lambda } => format!("beta1={beta1:.4} lambda={ridge_lambda:e}"),
    }
}

/// One row per scan, one row per (mode, attenuation) point of a sweep.
pub fn summarize(file: &ResultFile, runtime_s: Option<f64>) -> Vec<SummaryRow> {
    match &file.payload {
        ResultPayload::Scan(s) => vec![SummaryRow {
            task: s.task,
            mode: "delayed-input scan".into(),
            attenuation_db: s.config.preset().attenuation_db,
            metric: s.grid.metric,
            best_metric: s.grid.best.metric,
            best_params: params_label(&BestParams::Delay {
                beta2: s.grid.best.beta2,
                delay: s.grid.best.delay,
            }),
            runtime_s,
        }],
        ResultPayload::Sweep(s) => s
            .curves
            .iter()
            .flat_map(|c| {
                c.points.iter().map(move |p| SummaryRow {
                    task: s.task,
                    mode: c.mode.to_string(),
                    attenuation_db: p.attenuation_db,
                    metric: c.metric,
                    best_metric: p.best_metric,
                    best_params: params_label(&p.best_params),
                    runtime_s,
                })
            })
            .collect(),
    }
}

/// Loads result files (and their timing sidecars, when present) and renders
/// a table grouped by task.
pub fn report(paths: &[PathBuf]) -> Result<String> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one result file".into()));
    }
    let mut rows = Vec::new();
    for p in paths {
        let file = read_result(p)?;
        let runtime = std::fs::read_to_string(sidecar_path(p))
            .ok()
            .and_then(|s| serde_json::from_str::<TimingSidecar>(&s).ok())
            .map(|t| t.elapsed_s);
        rows.extend(summarize(&file, runtime));
    }
    Ok(format_report(&rows))
}

pub fn format_report(rows: &[SummaryRow]) -> String {
    let mut rows: Vec<&SummaryRow> = rows.iter().collect();
    // stable: keeps file order inside a task
    rows.sort_by_key(|r| r.task);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<20} {:>8} {:>10} {:>12}  {:<28} {:>10}",
        "task", "mode", "att[dB]", "metric", "best", "best params", "runtime[s]"
    );
    let mut last = None;
    for r in rows {
        if last.is_some() && last != Some(r.task) {
            out.push('\n');
        }
        last = Some(r.task);
        let metric = match r.metric {
            MetricKind::Nmse => "nmse",
            MetricKind::ErrorRate => "error-rate",
        };
        let runtime = r.runtime_s.map_or("-".to_string(), |s| format!("{s:.1}"));
        let _ = writeln!(
            out,
            "{:<14} {:<20} {:>8} {:>10} {:>12.5}  {:<28} {:>10}",
            r.task.to_string(),
            r.mode,
            r.attenuation_db,
            metric,
            r.best_metric,
            r.best_params,
            runtime
        );
    }
    out
}
