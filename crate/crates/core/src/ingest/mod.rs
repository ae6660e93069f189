//! On-disk data model: structured admission records, provider notes and
//! adjudicated labels, plus the join into a [`CohortDataset`].

mod cohort;
mod io;
mod record;

pub use cohort::{join_cohort, CohortDataset, JoinReport};
pub use io::*;
pub use record::*;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: value {value:?} is not in the declared domain")]
    BadCategory { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: value {value:?} rejected ({reason})")]
    BadValue { row: usize, column: String, value: String, reason: String },
    #[error("duplicate patient_id `{0}`")]
    DuplicatePatient(String),
    #[error("duplicate label for patient `{0}`")]
    DuplicateLabel(String),
    #[error("line {line}: malformed note ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("cohort has no structured records")]
    EmptyCohort,
    #[error("{missing} patients have no adjudicated label")]
    Unlabeled { missing: usize },
}
