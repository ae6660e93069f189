//! Train/predict pipeline shared by cross-validation and the CLI: fit text
//! and structured featurizers on the training rows only, then a classifier.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{combine, fit_schema, FeatureError, FeatureMatrix, FeatureSchema, SchemaOptions};
use crate::ingest::{CohortDataset, IngestError, StructuredRecord};
use crate::learn::{
    fit_forest, lasso_path_select, predict_proba_forest, predict_proba_lasso, ForestFit, Hyperparams,
    LambdaSelection, LassoFit, LearnError,
};
use crate::seed;
use crate::text::{concat_notes_with, fit_tfidf, fit_vocabulary, TextError, TfidfModel, TfidfOptions, TokenizerOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Structured,
    Notes,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    Lasso,
    Forest,
}

/// Feature source and classifier, written `structured:lasso` etc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelSpec {
    pub features: FeatureSet,
    pub learner: Learner,
}

impl ModelSpec {
    pub const ALL: [ModelSpec; 6] = [
        ModelSpec { features: FeatureSet::Structured, learner: Learner::Lasso },
        ModelSpec { features: FeatureSet::Notes, learner: Learner::Lasso },
        ModelSpec { features: FeatureSet::Combined, learner: Learner::Lasso },
        ModelSpec { features: FeatureSet::Structured, learner: Learner::Forest },
        ModelSpec { features: FeatureSet::Notes, learner: Learner::Forest },
        ModelSpec { features: FeatureSet::Combined, learner: Learner::Forest },
    ];

    pub fn new(features: FeatureSet, learner: Learner) -> Self {
        ModelSpec { features, learner }
    }

    pub fn uses_text(self) -> bool {
        self.features != FeatureSet::Structured
    }

    pub fn uses_structured(self) -> bool {
        self.features != FeatureSet::Notes
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.features {
            FeatureSet::Structured => "structured",
            FeatureSet::Notes => "notes",
            FeatureSet::Combined => "combined",
        };
        let b = match self.learner {
            Learner::Lasso => "lasso",
            Learner::Forest => "forest",
        };
        write!(f, "{a}:{b}")
    }
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ModelSpec::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| format!("unknown model spec `{s}` (expected e.g. notes:lasso)"))
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub min_count: u64,
    pub tokenizer: TokenizerOptions,
    pub tfidf: TfidfOptions,
    pub schema: SchemaOptions,
    pub hyperparams: Hyperparams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_count: 50,
            tokenizer: TokenizerOptions::default(),
            tfidf: TfidfOptions::default(),
            schema: SchemaOptions::default(),
            hyperparams: Hyperparams::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error("text: {0}")]
    Text(#[from] TextError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("fit: {0}")]
    Learn(#[from] LearnError),
    #[error("training rows are unlabeled")]
    Unlabeled,
    #[error("model file: {0}")]
    Incompatible(String),
}

/// Cohort with notes already tokenized and stemmed per patient. Tokenizing
/// is row-wise and fits nothing, so it is shared across folds.
#[derive(Debug, Clone)]
pub struct PreparedCohort {
    pub patient_ids: Vec<String>,
    pub records: Vec<StructuredRecord>,
    pub docs: Vec<Vec<String>>,
    pub labels: Option<Vec<bool>>,
}

impl PreparedCohort {
    pub fn new(dataset: &CohortDataset, tokenizer: TokenizerOptions) -> Result<Self, IngestError> {
        let records = dataset.records().to_vec();
        let docs = records.par_iter().map(|r| concat_notes_with(dataset.notes_for(&r.patient_id), tokenizer)).collect();
        let labels = if dataset.is_labeled() { Some(dataset.labels()?) } else { None };
        Ok(PreparedCohort {
            patient_ids: records.iter().map(|r| r.patient_id.clone()).collect(),
            records,
            docs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn all_positions(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum FittedModel {
    Lasso { selection: LambdaSelection, fit: LassoFit },
    Forest { fit: ForestFit },
}

pub const MODEL_FILE_VERSION: u32 = 1;

/// Everything needed to score new patients: featurizers and classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub version: u32,
    pub spec: ModelSpec,
    pub config: PipelineConfig,
    pub seed: u64,
    pub n_train: usize,
    pub schema: Option<FeatureSchema>,
    pub tfidf: Option<TfidfModel>,
    pub model: FittedModel,
}

fn design(
    spec: ModelSpec,
    schema: Option<&FeatureSchema>,
    tfidf: Option<&TfidfModel>,
    prep: &PreparedCohort,
    positions: &[usize],
) -> Result<FeatureMatrix, PipelineError> {
    let ids: Vec<String> = positions.iter().map(|&i| prep.patient_ids[i].clone()).collect();
    let structured = match schema {
        Some(s) => {
            let recs: Vec<StructuredRecord> = positions.iter().map(|&i| prep.records[i].clone()).collect();
            Some(s.encode(&recs)?)
        }
        None => None,
    };
    let text = match tfidf {
        Some(t) => {
            let docs: Vec<&[String]> = positions.iter().map(|&i| prep.docs[i].as_slice()).collect();
            Some(t.transform(ids, &docs)?)
        }
        None => None,
    };
    match (spec.features, structured, text) {
        (FeatureSet::Structured, Some(s), _) => Ok(s),
        (FeatureSet::Notes, _, Some(t)) => Ok(FeatureMatrix::from_text(t)),
        (FeatureSet::Combined, Some(s), Some(t)) => Ok(combine(&s, &t)?),
        _ => Err(PipelineError::Incompatible(format!("featurizers missing for {spec}"))),
    }
}

/// Fit featurizers and classifier on `positions` of `prep`.
pub fn train(
    prep: &PreparedCohort,
    positions: &[usize],
    spec: ModelSpec,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TrainedPipeline, PipelineError> {
    config.hyperparams.validate()?;
    let labels = prep.labels.as_ref().ok_or(PipelineError::Unlabeled)?;
    let y: Vec<bool> = positions.iter().map(|&i| labels[i]).collect();
    let schema = if spec.uses_structured() {
        let recs: Vec<StructuredRecord> = positions.iter().map(|&i| prep.records[i].clone()).collect();
        Some(fit_schema(&recs, config.schema)?)
    } else {
        None
    };
    let tfidf = if spec.uses_text() {
        let docs: Vec<&[String]> = positions.iter().map(|&i| prep.docs[i].as_slice()).collect();
        let vocab = fit_vocabulary(&docs, config.min_count)?;
        Some(fit_tfidf(&docs, vocab, config.tfidf))
    } else {
        None
    };
    let x = design(spec, schema.as_ref(), tfidf.as_ref(), prep, positions)?;
    let hp = &config.hyperparams;
    let model = match spec.learner {
        Learner::Lasso => {
            let (selection, fit) =
                lasso_path_select(&x, &y, None, hp.lasso.inner_folds, seed::derive_seed(seed, 1), &hp.lasso)?;
            FittedModel::Lasso { selection, fit }
        }
        Learner::Forest => FittedModel::Forest { fit: fit_forest(&x, &y, &hp.forest, seed::derive_seed(seed, 2))? },
    };
    Ok(TrainedPipeline {
        version: MODEL_FILE_VERSION,
        spec,
        config: config.clone(),
        seed,
        n_train: positions.len(),
        schema,
        tfidf,
        model,
    })
}

impl TrainedPipeline {
    pub fn design(&self, prep: &PreparedCohort, positions: &[usize]) -> Result<FeatureMatrix, PipelineError> {
        design(self.spec, self.schema.as_ref(), self.tfidf.as_ref(), prep, positions)
    }

    /// Predicted probability of the positive class for each position.
    pub fn predict(&self, prep: &PreparedCohort, positions: &[usize]) -> Result<Vec<f64>, PipelineError> {
        let x = self.design(prep, positions)?;
        Ok(match &self.model {
            FittedModel::Lasso { fit, .. } => predict_proba_lasso(fit, &x)?,
            FittedModel::Forest { fit } => predict_proba_forest(fit, &x)?,
        })
    }

    pub fn check_version(&self) -> Result<(), PipelineError> {
        if self.version != MODEL_FILE_VERSION {
            return Err(PipelineError::Incompatible(format!(
                "model file version {} (supported: {MODEL_FILE_VERSION})",
                self.version
            )));
        }
        Ok(())
    }
}
