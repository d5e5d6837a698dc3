//! Per-image evaluation, aggregation into Consistency / Responsiveness /
//! Robustness cells, and report output.

mod cells;
mod evaluate;
mod report;

use std::path::PathBuf;

use thiserror::Error;

use crate::adapter::AdapterError;
use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::perturb::PerturbError;
use crate::segment::SegmentError;

pub use cells::{
    build_cells, consistency, median, rank_agreement, responsiveness, robustness_metric,
    variance, Agreement, CellResult, DegeneratePolicy, Similarity,
};
pub use evaluate::{
    evaluate_image, run_evaluation, sort_records, EvalConfig, EvalRecord, ImageFailure,
    RunOutcome,
};
pub use report::{
    aggregate_report, distribution_csv, distribution_file_name, load_records, report_csv,
    report_from_records, report_json, write_report, RecordsFile, RobustnessReport, RunMetadata,
    SpecProvenance, DISTRIBUTIONS_DIR, RECORDS_JSON, REPORT_CSV, REPORT_JSON,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("adapter failure: {0}")]
    AdapterFailure(#[from] AdapterError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("no cells to report")]
    EmptyReport,
    #[error("{0} already exists (use --force to overwrite)")]
    OutputExists(PathBuf),
    #[error("invalid records file: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
