//! Single-report export in CSV or JSON from the report stage's artifacts.

use std::fs;

use clap::ValueEnum;
use serde_json::{Map, Value};

use geopattern::regions::ClusterReport;

use crate::error::CliError;
use crate::manifest::{Driver, Stage};
use crate::stages::{REPORT_CLUSTERS, REPORT_LONGTERM, REPORT_SHORT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    #[value(name = "short_patterns")]
    ShortPatterns,
    Clusters,
    Longterm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn typed(field: &str) -> Value {
    if let Ok(i) = field.parse::<i64>() {
        return Value::from(i);
    }
    match field.parse::<f64>() {
        Ok(x) if x.is_finite() && !field.starts_with('[') => serde_json::Number::from_f64(x).map_or(Value::from(field), Value::Number),
        _ => Value::from(field),
    }
}

/// CSV text as a JSON array of row objects; numeric fields become numbers.
pub fn csv_to_json(bytes: &[u8]) -> Result<Value, CliError> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let obj: Map<String, Value> = headers.iter().zip(rec.iter()).map(|(h, f)| (h.to_string(), typed(f))).collect();
        rows.push(Value::Object(obj));
    }
    Ok(Value::Array(rows))
}

fn clusters_csv(report: &ClusterReport) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["state", "cluster", "k"])?;
    for (state, c) in &report.assignment {
        w.write_record([state.as_str(), &c.to_string(), &report.k.to_string()])?;
    }
    w.into_inner().map_err(|e| CliError::internal(e.to_string()))
}

/// The requested report as bytes. The report stage must have run.
pub fn emit_report(d: &Driver, kind: ReportKind, format: ReportFormat) -> Result<Vec<u8>, CliError> {
    if !d.manifest.stages.contains_key(&Stage::Report) {
        return Err(CliError::data("report stage has not run; run `geopattern report` or `geopattern run-all`"));
    }
    let name = match kind {
        ReportKind::ShortPatterns => REPORT_SHORT,
        ReportKind::Clusters => REPORT_CLUSTERS,
        ReportKind::Longterm => REPORT_LONGTERM,
    };
    let bytes = fs::read(d.path(name))
        .map_err(|e| CliError::data(format!("cannot read {name}: {e}; rerun `geopattern report`")))?;
    match (kind, format) {
        (ReportKind::Clusters, ReportFormat::Json) => Ok(bytes),
        (ReportKind::Clusters, ReportFormat::Csv) => clusters_csv(&serde_json::from_slice(&bytes)?),
        (_, ReportFormat::Csv) => Ok(bytes),
        (_, ReportFormat::Json) => {
            let mut out = serde_json::to_vec_pretty(&csv_to_json(&bytes)?)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}
