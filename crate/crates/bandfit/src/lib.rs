//! Tensor-archive ingestion, batch fitting, reports and figures on top of
//! `bandfit-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod archive;
pub mod cli;
pub mod ingest;
pub mod pipeline;
pub mod render;
pub mod report;

pub use archive::{load_archive, write_archive, ArchiveBuilder, ArchiveError, TensorArchive};
pub use ingest::{extract_conv_slices, Extraction, KernelSlice};
pub use report::{emit_report, Report, ReportFormat};
