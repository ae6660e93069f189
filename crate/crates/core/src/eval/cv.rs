use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CvPlan, EvalError};
use crate::pipeline::{train, FittedModel, ModelSpec, PipelineConfig, PreparedCohort};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub patient_id: String,
    pub label: bool,
    pub probability: f64,
    pub fold: usize,
}

/// Pooled out-of-fold predictions, one per patient in cohort order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub spec: ModelSpec,
    pub entries: Vec<Prediction>,
}

impl PredictionSet {
    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.label).collect()
    }

    /// True when both sets list the same patients with the same labels.
    pub fn aligned_with(&self, other: &PredictionSet) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().zip(&other.entries).all(|(a, b)| a.patient_id == b.patient_id && a.label == b.label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Text columns fit on this fold's training rows.
    pub vocabulary_size: Option<usize>,
    pub lambda: Option<f64>,
    pub n_nonzero: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub predictions: PredictionSet,
    pub folds: Vec<FoldSummary>,
}

/// k-fold cross-validation with every featurizer refit inside each fold.
/// Test positions, their scores and the fold summary.
type FoldOutput = (Vec<usize>, Vec<f64>, FoldSummary);

pub fn cross_validate(
    prep: &PreparedCohort,
    spec: ModelSpec,
    config: &PipelineConfig,
    plan: &CvPlan,
) -> Result<CvResult, EvalError> {
    let labels = prep.labels.as_ref().ok_or_else(|| EvalError::Data("cohort is unlabeled".into()))?;
    if plan.patient_ids != prep.patient_ids {
        return Err(EvalError::PatientMismatch);
    }
    let master = config.hyperparams.seed;
    let per_fold: Vec<Result<FoldOutput, EvalError>> = (0..plan.k)
        .into_par_iter()
        .map(|f| {
            let train_pos = plan.train_positions(f);
            let test_pos = plan.test_positions(f);
            debug_assert!(test_pos.iter().all(|i| !train_pos.contains(i)));
            let fold_err = |e: &dyn std::fmt::Display| EvalError::Fit { spec: spec.to_string(), fold: f, message: e.to_string() };
            let tp = train(prep, &train_pos, spec, config, seed::derive_seed(master, f as u64)).map_err(|e| fold_err(&e))?;
            let probs = tp.predict(prep, &test_pos).map_err(|e| fold_err(&e))?;
            let (lambda, n_nonzero) = match &tp.model {
                FittedModel::Lasso { fit, .. } => (Some(fit.lambda), Some(fit.n_nonzero())),
                FittedModel::Forest { .. } => (None, None),
            };
            let summary = FoldSummary {
                fold: f,
                n_train: train_pos.len(),
                n_test: test_pos.len(),
                vocabulary_size: tp.tfidf.as_ref().map(|t| t.vocabulary.len()),
                lambda,
                n_nonzero,
            };
            Ok((test_pos, probs, summary))
        })
        .collect();

    let mut slots: Vec<Option<Prediction>> = vec![None; prep.len()];
    let mut folds = Vec::with_capacity(plan.k);
    for r in per_fold {
        let (test_pos, probs, summary) = r?;
        for (&i, p) in test_pos.iter().zip(probs) {
            assert!(slots[i].is_none(), "patient predicted twice");
            slots[i] = Some(Prediction {
                patient_id: prep.patient_ids[i].clone(),
                label: labels[i],
                probability: p,
                fold: summary.fold,
            });
        }
        folds.push(summary);
    }
    let entries = slots.into_iter().map(|s| s.expect("every patient is held out once")).collect();
    Ok(CvResult { predictions: PredictionSet { spec, entries }, folds })
}
