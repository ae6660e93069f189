//! Cross-validation, discrimination metrics, operating points and the
//! cohort balance table.

mod cv;
mod folds;
mod project;
mod report;
mod roc;
mod smd;

pub use cv::{cross_validate, CvResult, FoldSummary, Prediction, PredictionSet};
pub use project::{project_false_positives, FpProjection};
pub use report::{build_report, write_pr_csv, ComparisonEntry, EvaluationReport, ModelReport, REPORT_VERSION};
pub use smd::{smd, smd_binary, smd_categorical, smd_continuous, smd_records, SmdRow, SmdTable, Summary};

pub use folds::{assign_folds, make_folds, CvPlan};
pub use roc::{
    auroc, compare_auroc_paired, delong_ci, operating_point, pr_curve, AurocCi, OperatingPoint, PairedComparison,
    PrCurve, PrPoint,
};

use thiserror::Error;

use crate::ingest::IngestError;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot split {n} patients into {k} folds")]
    TooFewPatients { n: usize, k: usize },
    #[error("both classes must be present")]
    OneClassOnly,
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("scores contain NaN")]
    NonFinite,
    #[error("confidence level {0} outside (0, 1)")]
    BadLevel(f64),
    #[error("prediction sets cover different patients or labels")]
    PatientMismatch,
    #[error("{name}={value} is not a valid rate")]
    BadRate { name: &'static str, value: f64 },
    #[error("comparison groups must both be non-empty")]
    EmptyGroup,
    #[error("{spec}, fold {fold}: {message}")]
    Fit { spec: String, fold: usize, message: String },
    #[error("{0}")]
    Data(String),
}

impl From<IngestError> for EvalError {
    fn from(e: IngestError) -> Self {
        EvalError::Data(e.to_string())
    }
}
