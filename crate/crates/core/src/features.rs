//! Numeric encoding of structured admission fields, and the combined
//! structured + text design matrix.
//!
//! Column naming keeps structured columns disjoint from stemmed note terms
//! (which are purely alphabetic): categorical levels are `field=Level`,
//! comorbidities and medications carry a `comorbidity:`/`medication:` prefix,
//! the two admission flags are `field=1`, and the numeric columns contain an
//! underscore.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{BinaryField, CategoricalField, NumericField, StructuredRecord};
use crate::matrix::CsrMatrix;
use crate::text::DocTermMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot fit a feature schema on an empty cohort")]
    EmptyCohort,
    #[error("schema column `{column}` refers to unknown field or level `{value}`")]
    BadCategory { column: String, value: String },
    #[error("row order differs between blocks (first mismatch at row {row})")]
    RowMismatch { row: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum Encoding {
    /// z-score with moments from the fitting set.
    Numeric { mean: f64, sd: f64 },
    OneHot { level: String },
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub field: String,
    #[serde(flatten)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaOptions {
    /// Drop discharge disposition and length of stay, which are only known
    /// after the admission ends.
    pub exclude_outcome_features: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub options: SchemaOptions,
    pub columns: Vec<FeatureColumn>,
}

pub const SCHEMA_VERSION: u32 = 1;

fn is_outcome(field: &str) -> bool {
    field == NumericField::LengthOfStayDays.column() || field == CategoricalField::DischargeDisposition.column()
}

fn binary_name(field: BinaryField) -> String {
    use BinaryField::*;
    match field {
        IcuTransfer | Vaccinated => format!("{}=1", field.column()),
        Surgery | Cancer | Cardiovascular | Hypertension | ChronicLiver | Copd | Asthma | ChronicRenal
        | Diabetes => format!("comorbidity:{}", field.column()),
        _ => format!("medication:{}", field.column()),
    }
}

/// Sample mean and standard deviation (n - 1); sd falls back to 1 when degenerate.
fn moments(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 1.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (mean, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
}

/// Build the column layout from declared domains, with standardization
/// moments taken from `records`.
pub fn fit_schema(records: &[StructuredRecord], options: SchemaOptions) -> Result<FeatureSchema, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::EmptyCohort);
    }
    let keep = |field: &str| !(options.exclude_outcome_features && is_outcome(field));
    let mut columns = Vec::new();
    for f in NumericField::ALL {
        if !keep(f.column()) {
            continue;
        }
        let (mean, sd) = moments(records.iter().map(|r| r.numeric(f)));
        columns.push(FeatureColumn {
            name: f.column().to_string(),
            field: f.column().to_string(),
            encoding: Encoding::Numeric { mean, sd },
        });
    }
    for f in CategoricalField::ALL {
        if !keep(f.column()) {
            continue;
        }
        for level in f.levels() {
            columns.push(FeatureColumn {
                name: format!("{}={}", f.column(), level),
                field: f.column().to_string(),
                encoding: Encoding::OneHot { level: level.to_string() },
            });
        }
    }
    for f in BinaryField::ALL {
        columns.push(FeatureColumn { name: binary_name(f), field: f.column().to_string(), encoding: Encoding::Binary });
    }
    Ok(FeatureSchema { version: SCHEMA_VERSION, options, columns })
}

enum Resolved {
    Numeric(NumericField, f64, f64),
    Level(CategoricalField, usize),
    Binary(BinaryField),
}

impl FeatureSchema {
    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn resolve(&self) -> Result<Vec<Resolved>, FeatureError> {
        self.columns
            .iter()
            .map(|c| {
                let bad = |value: &str| FeatureError::BadCategory { column: c.name.clone(), value: value.to_string() };
                match &c.encoding {
                    Encoding::Numeric { mean, sd } => NumericField::ALL
                        .into_iter()
                        .find(|f| f.column() == c.field)
                        .map(|f| Resolved::Numeric(f, *mean, *sd))
                        .ok_or_else(|| bad(&c.field)),
                    Encoding::OneHot { level } => {
                        let field = CategoricalField::from_column(&c.field).ok_or_else(|| bad(&c.field))?;
                        let idx = field.levels().iter().position(|l| l == level).ok_or_else(|| bad(level))?;
                        Ok(Resolved::Level(field, idx))
                    }
                    Encoding::Binary => {
                        BinaryField::from_column(&c.field).map(Resolved::Binary).ok_or_else(|| bad(&c.field))
                    }
                }
            })
            .collect()
    }

    /// Encode records row by row in schema column order.
    pub fn encode(&self, records: &[StructuredRecord]) -> Result<FeatureMatrix, FeatureError> {
        let resolved = self.resolve()?;
        let rows = records
            .iter()
            .map(|r| {
                resolved
                    .iter()
                    .enumerate()
                    .filter_map(|(j, col)| {
                        let v = match *col {
                            Resolved::Numeric(f, mean, sd) => (r.numeric(f) - mean) / sd,
                            Resolved::Level(f, level) => (r.level(f) == level) as u8 as f64,
                            Resolved::Binary(f) => r.binary(f) as u8 as f64,
                        };
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        let n_cols = self.columns.len();
        Ok(FeatureMatrix {
            row_ids: records.iter().map(|r| r.patient_id.clone()).collect(),
            columns: self.column_names(),
            blocks: vec![Block { kind: BlockKind::Structured, start: 0, end: n_cols }],
            matrix: CsrMatrix::from_rows(n_cols, rows),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Structured,
    Text,
}

/// Half-open column range `[start, end)` holding one feature source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub kind: BlockKind,
    pub start: usize,
    pub end: usize,
}

/// Design matrix with patient row ids and named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub columns: Vec<String>,
    pub blocks: Vec<Block>,
    pub matrix: CsrMatrix,
}

impl FeatureMatrix {
    pub fn from_text(text: DocTermMatrix) -> Self {
        let n_cols = text.columns.len();
        FeatureMatrix {
            row_ids: text.row_ids,
            columns: text.columns,
            blocks: vec![Block { kind: BlockKind::Text, start: 0, end: n_cols }],
            matrix: text.matrix,
        }
    }

    /// Plain matrix with a single structured block; handy for tests and toy problems.
    pub fn from_dense(columns: Vec<String>, rows: &[Vec<f64>]) -> Self {
        let n_cols = columns.len();
        FeatureMatrix {
            row_ids: (0..rows.len()).map(|i| i.to_string()).collect(),
            blocks: vec![Block { kind: BlockKind::Structured, start: 0, end: n_cols }],
            matrix: CsrMatrix::from_dense(rows, n_cols),
            columns,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.n_cols()
    }

    pub fn block(&self, kind: BlockKind) -> Option<Block> {
        self.blocks.iter().copied().find(|b| b.kind == kind)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            columns: self.columns.clone(),
            blocks: self.blocks.clone(),
            matrix: self.matrix.select_rows(rows),
        }
    }
}

/// `[structured | text]`, requiring identical row ids in identical order.
pub fn combine(structured: &FeatureMatrix, text: &DocTermMatrix) -> Result<FeatureMatrix, FeatureError> {
    if structured.row_ids.len() != text.row_ids.len() {
        return Err(FeatureError::RowMismatch { row: structured.row_ids.len().min(text.row_ids.len()) });
    }
    if let Some(row) = structured.row_ids.iter().zip(&text.row_ids).position(|(a, b)| a != b) {
        return Err(FeatureError::RowMismatch { row });
    }
    let offset = structured.n_cols();
    let mut blocks = structured.blocks.clone();
    blocks.push(Block { kind: BlockKind::Text, start: offset, end: offset + text.columns.len() });
    let mut columns = structured.columns.clone();
    columns.extend(text.columns.iter().cloned());
    Ok(FeatureMatrix {
        row_ids: structured.row_ids.clone(),
        columns,
        blocks,
        matrix: structured.matrix.hstack(&text.matrix),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BmiCategory, LabLevel, Sex};

    fn cohort() -> Vec<StructuredRecord> {
        let levels = [
            BmiCategory::Missing,
            BmiCategory::Normal,
            BmiCategory::Obese,
            BmiCategory::Overweight,
            BmiCategory::Underweight,
        ];
        levels
            .iter()
            .enumerate()
            .map(|(i, &bmi)| {
                let mut r = StructuredRecord::blank(format!("p{i}"));
                r.bmi_category = bmi;
                r.age_years = 40.0 + 10.0 * i as f64;
                r.length_of_stay_days = i as f64;
                r.vaccinated = i % 2 == 0;
                r.labs.d_dimer = if i == 0 { LabLevel::NotTaken } else { LabLevel::High };
                r
            })
            .collect()
    }

    #[test]
    fn all_bmi_levels_get_columns() {
        let s = fit_schema(&cohort(), SchemaOptions::default()).unwrap();
        let bmi: Vec<_> = s.columns.iter().filter(|c| c.field == "bmi_category").collect();
        assert_eq!(bmi.len(), 5);
    }

    #[test]
    fn declared_levels_not_observed_levels() {
        let recs = cohort();
        assert!(recs.iter().all(|r| r.sex == Sex::Female));
        let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
        let m = s.encode(&recs).unwrap();
        let male = m.columns.iter().position(|c| c == "sex=Male").unwrap();
        assert!((0..m.n_rows()).all(|i| m.matrix.get(i, male) == 0.0));
    }

    #[test]
    fn centering_at_fit_mean() {
        let recs = cohort();
        let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
        let mut probe = StructuredRecord::blank("x");
        probe.age_years = 60.0; // mean of 40..80
        let m = s.encode(&[probe]).unwrap();
        assert_eq!(m.matrix.get(0, 0), 0.0);
    }

    #[test]
    fn encoding_values() {
        let recs = cohort();
        let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
        let m = s.encode(&recs).unwrap();
        let col = |n: &str| m.columns.iter().position(|c| c == n).unwrap();
        assert_eq!(m.matrix.get(0, col("vaccinated=1")), 1.0);
        assert_eq!(m.matrix.get(0, col("d_dimer=NotTaken")), 1.0);
        assert_eq!(m.matrix.get(0, col("d_dimer=High")), 0.0);
        assert_eq!(m.matrix.get(1, col("d_dimer=High")), 1.0);
    }

    #[test]
    fn uses_training_moments_for_new_batches() {
        let recs = cohort();
        let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
        let batch = vec![recs[4].clone()];
        let m = s.encode(&batch).unwrap();
        let Encoding::Numeric { mean, sd } = s.columns[0].encoding else { panic!() };
        assert!((m.matrix.get(0, 0) - (80.0 - mean) / sd).abs() < 1e-12);
        assert!(m.matrix.get(0, 0) != 0.0);
    }

    #[test]
    fn exclude_outcome_features_drops_los_and_disposition() {
        let s = fit_schema(&cohort(), SchemaOptions { exclude_outcome_features: true }).unwrap();
        assert!(s.columns.iter().all(|c| c.field != "length_of_stay_days" && c.field != "discharge_disposition"));
        let full = fit_schema(&cohort(), SchemaOptions::default()).unwrap();
        assert_eq!(full.len() - s.len(), 1 + 3);
    }

    #[test]
    fn structured_names_are_unique_and_not_alphabetic_terms() {
        let s = fit_schema(&cohort(), SchemaOptions::default()).unwrap();
        let mut names = s.column_names();
        assert!(names.iter().all(|n| !n.chars().all(|c| c.is_ascii_lowercase())));
        names.sort();
        names.dedup();
        assert_eq!(names.len(), s.len());
    }

    #[test]
    fn empty_cohort_rejected() {
        assert_eq!(fit_schema(&[], SchemaOptions::default()), Err(FeatureError::EmptyCohort));
    }

    #[test]
    fn schema_json_round_trip_and_bad_level() {
        let s = fit_schema(&cohort(), SchemaOptions::default()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let broken: FeatureSchema = serde_json::from_str(&json.replace("\"Underweight\"", "\"Huge\"")).unwrap();
        assert!(matches!(broken.encode(&cohort()), Err(FeatureError::BadCategory { .. })));
    }

    #[test]
    fn combine_shapes_and_row_checks() {
        let recs = cohort();
        let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
        let x = s.encode(&recs).unwrap();
        let empty = DocTermMatrix::empty(x.row_ids.clone());
        let c = combine(&x, &empty).unwrap();
        assert_eq!(c.n_cols(), x.n_cols());
        assert_eq!(c.block(BlockKind::Text).unwrap().start, c.block(BlockKind::Text).unwrap().end);

        let mut swapped = x.row_ids.clone();
        swapped.swap(0, 1);
        let bad = DocTermMatrix::empty(swapped);
        assert_eq!(combine(&x, &bad), Err(FeatureError::RowMismatch { row: 0 }));
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn record_strategy() -> impl Strategy<Value = StructuredRecord> {
            (0.0..110.0f64, 0.0..60.0f64, prop::collection::vec(0usize..16, 13), prop::collection::vec(any::<bool>(), 20))
                .prop_map(|(age, los, levels, flags)| {
                    let mut r = StructuredRecord::blank("");
                    r.age_years = age;
                    r.length_of_stay_days = los;
                    for (f, l) in CategoricalField::ALL.into_iter().zip(levels) {
                        r.set_level(f, l % f.n_levels());
                    }
                    for (f, b) in BinaryField::ALL.into_iter().zip(flags) {
                        r.set_binary(f, b);
                    }
                    r
                })
        }

        fn cohort_strategy() -> impl Strategy<Value = Vec<StructuredRecord>> {
            prop::collection::vec(record_strategy(), 2..40).prop_map(|mut v| {
                for (i, r) in v.iter_mut().enumerate() {
                    r.patient_id = format!("p{i}");
                }
                v
            })
        }

        proptest! {
            #[test]
            fn one_hot_groups_sum_to_one(recs in cohort_strategy()) {
                let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
                let m = s.encode(&recs).unwrap().matrix.to_dense_rows();
                for f in CategoricalField::ALL {
                    let cols: Vec<usize> = s.columns.iter().enumerate()
                        .filter(|(_, c)| c.field == f.column()).map(|(j, _)| j).collect();
                    prop_assert_eq!(cols.len(), f.n_levels());
                    for row in &m {
                        prop_assert_eq!(cols.iter().map(|&j| row[j]).sum::<f64>(), 1.0);
                    }
                }
            }

            #[test]
            fn fitted_numeric_columns_are_standardized(recs in cohort_strategy()) {
                let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
                let m = s.encode(&recs).unwrap().matrix.to_dense_rows();
                let n = recs.len() as f64;
                for j in 0..2 {
                    let xs: Vec<f64> = m.iter().map(|r| r[j]).collect();
                    let mean = xs.iter().sum::<f64>() / n;
                    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                    prop_assert!(mean.abs() < 1e-9);
                    let raw_constant = recs.iter().all(|r| r.numeric(NumericField::ALL[j]) == recs[0].numeric(NumericField::ALL[j]));
                    if !raw_constant {
                        prop_assert!((sd - 1.0).abs() < 1e-9);
                    }
                }
            }

            #[test]
            fn encode_is_row_wise(recs in cohort_strategy(), seed in any::<u64>()) {
                let s = fit_schema(&recs, SchemaOptions::default()).unwrap();
                let mut perm: Vec<usize> = (0..recs.len()).collect();
                let mut state = seed;
                for i in (1..perm.len()).rev() {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    perm.swap(i, (state >> 33) as usize % (i + 1));
                }
                let shuffled: Vec<_> = perm.iter().map(|&i| recs[i].clone()).collect();
                let a = s.encode(&recs).unwrap();
                let b = s.encode(&shuffled).unwrap();
                prop_assert_eq!(b.matrix, a.matrix.select_rows(&perm));
            }
        }
    }
}
