//! Report serialization: a fixed-schema CSV (the golden, diffable format) and a
//! JSON mirror with explicit nulls.
//!
//! Floats are printed with 17 significant digits (`{:.16e}`), enough to round-trip
//! any f64, so re-running a seeded sweep reproduces the file byte for byte.

use crate::harness::sweep::{SweepReport, SweepRow};
use crate::harness::HarnessError;
use std::io::Write;
use std::path::Path;

/// Column names and order of the sweep CSV; one line per grid point.
pub const CSV_HEADER: [&str; 13] = [
    "axis_name",
    "axis_value",
    "n_trials",
    "n_valid",
    "p_dec",
    "stderr",
    "p_fa",
    "lb_thm1",
    "ub_cor1",
    "lb_thm3",
    "lb_thm4",
    "lq_cost_mean",
    "config_hash",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// 17-significant-digit float, the file format's only numeric encoding.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn emit_csv(report: &SweepReport, out: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in &report.rows {
        w.write_record([
            row.axis_name.clone(),
            format_float(row.axis_value),
            row.n_trials.to_string(),
            row.n_valid.to_string(),
            format_opt(row.p_dec),
            format_opt(row.stderr),
            format_opt(row.p_fa),
            format_opt(row.lb_thm1),
            format_opt(row.ub_cor1),
            format_opt(row.lb_thm3),
            format_opt(row.lb_thm4),
            format_opt(row.lq_cost_mean),
            row.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_json(report: &SweepReport, mut out: impl Write) -> Result<(), serde_json::Error> {
    serde_json::to_writer_pretty(&mut out, report)?;
    // `to_writer_pretty` emits no trailing newline
    out.write_all(b"\n").map_err(serde_json::Error::io)?;
    Ok(())
}

/// Write `report` in `format` to `path`, or to stdout when no path is given.
pub fn emit_report(
    report: &SweepReport,
    format: ReportFormat,
    path: Option<&Path>,
) -> Result<(), HarnessError> {
    let io_err = |source: std::io::Error, path: Option<&Path>| HarnessError::Io {
        path: path.map_or_else(|| "<stdout>".into(), |p| p.display().to_string()),
        source,
    };
    let mut buf: Vec<u8> = Vec::new();
    match format {
        ReportFormat::Csv => emit_csv(report, &mut buf)
            .map_err(|e| HarnessError::Runtime(format!("csv serialization failed: {e}")))?,
        ReportFormat::Json => emit_json(report, &mut buf)
            .map_err(|e| HarnessError::Runtime(format!("json serialization failed: {e}")))?,
    }
    match path {
        Some(p) => std::fs::write(p, &buf).map_err(|e| io_err(e, Some(p))),
        None => std::io::stdout().write_all(&buf).map_err(|e| io_err(e, None)),
    }
}

/// Rows don't serialize `Vec<TrialOutcome>`; expose what a plotting script needs.
pub fn long_format_series(row: &SweepRow) -> Vec<(&'static str, f64)> {
    let mut series = Vec::new();
    let mut push = |name, v: Option<f64>| {
        if let Some(v) = v {
            series.push((name, v));
        }
    };
    push("p_dec", row.p_dec);
    push("p_fa", row.p_fa);
    push("lb_thm1", row.lb_thm1);
    push("ub_cor1", row.ub_cor1);
    push("lb_thm3", row.lb_thm3);
    push("lb_thm4", row.lb_thm4);
    push("lq_cost_mean", row.lq_cost_mean);
    series
}
