use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ReportFormat;
use super::run::ExperimentResult;
use crate::error::Result;

/// Means over successful repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub repetitions: usize,
    pub marginal_coverage: f64,
    pub wsc_coverage: f64,
    pub avg_size: f64,
    /// Mean over repetitions where at least one point was covered.
    pub avg_size_covered: Option<f64>,
    pub seconds: f64,
}

impl Aggregate {
    pub fn of(result: &ExperimentResult) -> Self {
        let reps = &result.repetitions;
        let n = reps.len().max(1) as f64;
        let mean =
            |f: &dyn Fn(&super::RepetitionReport) -> f64| reps.iter().map(f).sum::<f64>() / n;
        let covered: Vec<f64> = reps
            .iter()
            .filter_map(|r| r.evaluation.avg_size_covered)
            .collect();
        Self {
            repetitions: reps.len(),
            marginal_coverage: mean(&|r| r.evaluation.marginal_coverage),
            wsc_coverage: mean(&|r| r.evaluation.wsc_coverage),
            avg_size: mean(&|r| r.evaluation.avg_size),
            avg_size_covered: (!covered.is_empty())
                .then(|| covered.iter().sum::<f64>() / covered.len() as f64),
            seconds: mean(&|r| r.seconds),
        }
    }
}

#[derive(Serialize)]
struct CsvRow {
    method: String,
    blackbox: String,
    alpha: f64,
    rep: usize,
    marginal_coverage: f64,
    wsc_coverage: f64,
    avg_size: f64,
    avg_size_covered: Option<f64>,
    seconds: f64,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    #[serde(flatten)]
    result: &'a ExperimentResult,
    aggregate: Aggregate,
}

/// Serializes `result` in the requested format.
pub fn write_report<W: Write>(
    result: &ExperimentResult,
    format: ReportFormat,
    writer: W,
) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(writer);
            for r in &result.repetitions {
                wtr.serialize(CsvRow {
                    method: result.config.method.to_string(),
                    blackbox: result.config.black_box.to_string(),
                    alpha: result.config.alpha,
                    rep: r.rep,
                    marginal_coverage: r.evaluation.marginal_coverage,
                    wsc_coverage: r.evaluation.wsc_coverage,
                    avg_size: r.evaluation.avg_size,
                    avg_size_covered: r.evaluation.avg_size_covered,
                    seconds: r.seconds,
                })?;
            }
            if result.repetitions.is_empty() {
                wtr.write_record([
                    "method",
                    "blackbox",
                    "alpha",
                    "rep",
                    "marginal_coverage",
                    "wsc_coverage",
                    "avg_size",
                    "avg_size_covered",
                    "seconds",
                ])?;
            }
            wtr.flush()?;
        }
        ReportFormat::Json => {
            let mut writer = writer;
            let report = JsonReport {
                result,
                aggregate: Aggregate::of(result),
            };
            serde_json::to_writer_pretty(&mut writer, &report)?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes the report to `path`.
pub fn emit_report(result: &ExperimentResult, format: ReportFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_report(result, format, &mut out)?;
    out.flush()?;
    Ok(())
}
