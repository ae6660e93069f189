use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    compare_auroc_paired, delong_ci, operating_point, pr_curve, AurocCi, CvPlan, CvResult, EvalError, FoldSummary,
    OperatingPoint, PairedComparison, PrCurve,
};
use crate::pipeline::{ModelSpec, PipelineConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub spec: ModelSpec,
    pub auroc: AurocCi,
    pub operating_point: OperatingPoint,
    pub pr_curve: PrCurve,
    pub folds: Vec<FoldSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub a: ModelSpec,
    pub b: ModelSpec,
    #[serde(flatten)]
    pub result: PairedComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub report_version: u32,
    pub n_patients: usize,
    pub n_positive: usize,
    pub k: usize,
    pub cv_seed: u64,
    pub stratified: bool,
    pub target_sensitivity: f64,
    pub ci_level: f64,
    pub config: PipelineConfig,
    pub models: Vec<ModelReport>,
    pub comparisons: Vec<ComparisonEntry>,
}

impl EvaluationReport {
    pub fn model(&self, spec: ModelSpec) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.spec == spec)
    }

    pub fn comparison(&self, a: ModelSpec, b: ModelSpec) -> Option<&ComparisonEntry> {
        self.comparisons.iter().find(|c| c.a == a && c.b == b)
    }
}

/// Metrics for each cross-validated model and DeLong tests for every pair.
pub fn build_report(
    results: &[CvResult],
    plan: &CvPlan,
    config: &PipelineConfig,
    target_sensitivity: f64,
    ci_level: f64,
) -> Result<EvaluationReport, EvalError> {
    let mut models = Vec::new();
    for r in results {
        let (s, l) = (r.predictions.scores(), r.predictions.labels());
        let curve = pr_curve(&s, &l)?;
        models.push(ModelReport {
            spec: r.predictions.spec,
            auroc: delong_ci(&s, &l, ci_level)?,
            operating_point: operating_point(&curve, target_sensitivity)?,
            pr_curve: curve,
            folds: r.folds.clone(),
        });
    }
    let mut comparisons = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            if !a.predictions.aligned_with(&b.predictions) {
                return Err(EvalError::PatientMismatch);
            }
            let result = compare_auroc_paired(&a.predictions.scores(), &b.predictions.scores(), &a.predictions.labels())?;
            comparisons.push(ComparisonEntry { a: a.predictions.spec, b: b.predictions.spec, result });
        }
    }
    let n_positive = results.first().map(|r| r.predictions.labels().iter().filter(|&&l| l).count()).unwrap_or(0);
    Ok(EvaluationReport {
        report_version: REPORT_VERSION,
        n_patients: plan.patient_ids.len(),
        n_positive,
        k: plan.k,
        cv_seed: plan.seed,
        stratified: plan.stratified,
        target_sensitivity,
        ci_level,
        config: config.clone(),
        models,
        comparisons,
    })
}

/// One CSV row per curve point: `spec,threshold,recall,precision`.
pub fn write_pr_csv<W: Write>(report: &EvaluationReport, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["spec", "threshold", "recall", "precision"])?;
    for m in &report.models {
        for p in &m.pr_curve.points {
            w.write_record([m.spec.to_string(), p.threshold.to_string(), p.recall.to_string(), p.precision.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
