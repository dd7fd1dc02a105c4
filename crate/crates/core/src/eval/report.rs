//! Flat CSV rows and JSON writers for evaluation outputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::correlation::CorrelationReport;
use super::metrics::MetricsReport;
use crate::error::{Error, Result};

/// One line of the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub evaluation: String,
    pub mode: String,
    pub kl: f64,
    pub tv: f64,
    pub brier: f64,
    pub dir_acc: f64,
    pub n: usize,
}

impl MetricsRow {
    pub fn new(variant: impl Into<String>, evaluation: impl Into<String>, report: &MetricsReport) -> Self {
        MetricsRow {
            variant: variant.into(),
            evaluation: evaluation.into(),
            mode: report.mode.name().to_string(),
            kl: report.kl,
            tv: report.tv,
            brier: report.brier,
            dir_acc: report.directional_accuracy,
            n: report.n,
        }
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_correlation_csv(path: &Path, report: &CorrelationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pipeline_id", "object_colour", "object_shape", "elo", "model_value"])?;
    for p in &report.points {
        w.write_record([
            p.pipeline_id.clone(),
            p.object.colour.name().to_string(),
            p.object.shape.name().to_string(),
            p.elo.to_string(),
            p.model_value.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
