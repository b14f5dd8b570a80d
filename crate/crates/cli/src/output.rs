//! CSV outputs. Each writer appends whole groups of rows with one write so
//! an interrupted run never leaves half a group behind.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use eqreg_core::eval::EvalReport;
use eqreg_core::experiment::ArmOutcome;
use serde::Serialize;

pub const REPORTS: &str = "reports.csv";
pub const CURVES: &str = "curves.csv";
pub const LOSSES: &str = "losses.csv";
pub const TIMINGS: &str = "timings.csv";
pub const FAILURES: &str = "failures.csv";

/// Serializes `rows` as CSV, with a header only when `header` is set.
pub fn render<T: Serialize>(rows: &[T], header: bool) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(header).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
}

/// Appends rows to `path`, writing the header if the file is new or empty.
pub fn append<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let bytes = render(rows, fresh)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    f.write_all(&bytes)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_reports(path: &Path) -> Result<Vec<EvalReport>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<EvalReport>, _>>()
        .with_context(|| format!("malformed report file {}", path.display()))
}

/// Long-format error-vs-N rows.
#[derive(Debug, Serialize)]
pub struct CurveRow<'a> {
    pub case: &'a str,
    pub model: &'a str,
    pub arm: &'a str,
    pub n: usize,
    pub seed: u64,
    pub split: &'a str,
    pub error: f64,
}

#[derive(Debug, Serialize)]
pub struct LossRow<'a> {
    pub case: &'a str,
    pub model: &'a str,
    pub arm: &'a str,
    pub n: usize,
    pub seed: u64,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Serialize)]
pub struct TimingRow<'a> {
    pub case: &'a str,
    pub model: &'a str,
    pub arm: &'a str,
    pub n: usize,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Serialize)]
pub struct FailureRow<'a> {
    pub case: &'a str,
    pub model: &'a str,
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

fn model_name(r: &EvalReport) -> &'static str {
    match r.model {
        eqreg_core::predictors::ModelKind::Mlp => "mlp",
        eqreg_core::predictors::ModelKind::Forest => "forest",
    }
}

/// Appends one finished group to every output file in `dir`.
pub fn write_group(dir: &Path, outcomes: &[ArmOutcome]) -> Result<()> {
    let reports: Vec<&EvalReport> = outcomes.iter().map(|o| &o.report).collect();
    let mut curves = Vec::new();
    let mut losses = Vec::new();
    let mut timings = Vec::new();
    for o in outcomes {
        let r = &o.report;
        let (case, model, arm) = (r.case.name(), model_name(r), r.arm.name());
        for (split, error) in [("train", r.train_e), ("test", r.test_e)] {
            curves.push(CurveRow {
                case,
                model,
                arm,
                n: r.n,
                seed: r.seed,
                split,
                error,
            });
        }
        if let Some(h) = &o.history {
            losses.extend(h.epoch_losses.iter().enumerate().map(|(e, &loss)| LossRow {
                case,
                model,
                arm,
                n: r.n,
                seed: r.seed,
                epoch: e + 1,
                loss,
            }));
        }
        timings.push(TimingRow {
            case,
            model,
            arm,
            n: r.n,
            seed: r.seed,
            wall_time_s: o.wall_time_s,
        });
    }
    append(&dir.join(REPORTS), &reports)?;
    append(&dir.join(CURVES), &curves)?;
    append(&dir.join(LOSSES), &losses)?;
    append(&dir.join(TIMINGS), &timings)?;
    Ok(())
}
