//! Fit reports as JSON and CSV.
//!
//! JSON layout, with fields in this order:
//!
//! ```text
//! { "model_id", "layers": [LayerSummary], "aggregate": LayerSummary,
//!   "histogram": Histogram, "slices": [SliceRecord], "warnings": [...] }
//! ```
//!
//! CSV has one row per slice, CRLF line endings, and the columns in
//! [`CSV_COLUMNS`]. Floats are written in shortest round-trip form.

use std::fs;
use std::path::{Path, PathBuf};

use bandfit_core::{layer_summary, FitResult, GaborParams, Histogram, LayerSummary};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{IngestWarning, KernelSlice};

pub const CSV_COLUMNS: [&str; 15] = [
    "layer",
    "layer_index",
    "tensor",
    "filter",
    "channel",
    "rms",
    "degenerate",
    "amplitude",
    "phase",
    "u1",
    "u2",
    "sigma",
    "iterations",
    "init_rank",
    "scale",
];

pub const AGGREGATE_NAME: &str = "all layers";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{0}")]
    Stats(#[from] bandfit_core::Error),
    #[error("{slices} slices but {fits} fits")]
    Mismatch { slices: usize, fits: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRecord {
    pub layer: String,
    pub layer_index: usize,
    pub tensor: String,
    pub filter: usize,
    pub channel: usize,
    pub rms: f64,
    pub params: GaborParams,
    pub degenerate: bool,
    pub iterations: usize,
    pub init_rank: usize,
    /// Peak magnitude of the raw kernel; `params` describe the kernel divided by it.
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model_id: String,
    pub layers: Vec<LayerSummary>,
    pub aggregate: LayerSummary,
    /// Residuals of non-degenerate fits, collapsed across layers.
    pub histogram: Histogram,
    pub slices: Vec<SliceRecord>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl Report {
    /// Assembles a report from slices in provenance order and their fits.
    /// `layers` lists `(layer_index, layer_name)` in depth order.
    pub fn build(
        model_id: &str,
        layers: &[(usize, String)],
        slices: &[KernelSlice],
        fits: &[FitResult],
        edges: &[f64],
        warnings: Vec<IngestWarning>,
    ) -> Result<Self, ReportError> {
        if slices.len() != fits.len() {
            return Err(ReportError::Mismatch {
                slices: slices.len(),
                fits: fits.len(),
            });
        }
        let summaries = layers
            .iter()
            .map(|(index, name)| {
                let members: Vec<FitResult> = slices
                    .iter()
                    .zip(fits)
                    .filter(|(s, _)| s.layer_index == *index)
                    .map(|(_, f)| *f)
                    .collect();
                layer_summary(&members, name)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let aggregate = layer_summary(fits, AGGREGATE_NAME)?;
        let residuals: Vec<f64> = fits.iter().filter(|f| !f.degenerate).map(|f| f.rms).collect();
        let histogram = bandfit_core::histogram(&residuals, edges)?;
        let records = slices
            .iter()
            .zip(fits)
            .map(|(s, f)| SliceRecord {
                layer: s.layer_name.clone(),
                layer_index: s.layer_index,
                tensor: s.tensor_name.clone(),
                filter: s.filter_index,
                channel: s.channel_index,
                rms: f.rms,
                params: f.params,
                degenerate: f.degenerate,
                iterations: f.iterations,
                init_rank: f.init_rank,
                scale: f.scale,
            })
            .collect();
        Ok(Self {
            model_id: model_id.into(),
            layers: summaries,
            aggregate,
            histogram,
            slices: records,
            warnings,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for r in &self.slices {
            let p = &r.params;
            w.write_record([
                r.layer.clone(),
                r.layer_index.to_string(),
                r.tensor.clone(),
                r.filter.to_string(),
                r.channel.to_string(),
                format!("{:?}", r.rms),
                r.degenerate.to_string(),
                format!("{:?}", p.amplitude),
                format!("{:?}", p.phase),
                format!("{:?}", p.u_c.u1),
                format!("{:?}", p.u_c.u2),
                format!("{:?}", p.sigma),
                r.iterations.to_string(),
                r.init_rank.to_string(),
                format!("{:?}", r.scale),
            ])?;
        }
        w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    fs::write(path, bytes).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_report(report: &Report, format: ReportFormat, path: &Path) -> Result<(), ReportError> {
    match format {
        ReportFormat::Json => write_file(path, report.to_json().as_bytes()),
        ReportFormat::Csv => {
            let bytes = report.to_csv().map_err(|source| ReportError::Csv {
                path: path.to_path_buf(),
                source,
            })?;
            write_file(path, &bytes)
        }
    }
}
