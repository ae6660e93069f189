//! Outcome association models: vaccination against length of stay, ICU
//! transfer and in-hospital death, overall and within each label stratum.

mod glm;

pub use glm::{fit_glm, Effect, Family, GlmFit};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CohortDataset, DischargeDisposition, StructuredRecord};

pub const ASSOC_REPORT_VERSION: u32 = 1;
const MAX_ITER: usize = 100;
const TOL: f64 = 1e-10;
const LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AssocError {
    #[error("no patients in the analysis cohort")]
    EmptyCohort,
    #[error("design rows and coefficient names disagree in length")]
    DesignShape,
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("design matrix is not of full column rank")]
    RankDeficient,
    #[error("fitted values reached the boundary (separation)")]
    SeparationDetected,
    #[error("no convergence after {iterations} iterations")]
    DidNotConverge { iterations: usize },
    #[error("{0}")]
    Data(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    LengthOfStay,
    Icu,
    Mortality,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::LengthOfStay, Outcome::Icu, Outcome::Mortality];

    pub fn family(self) -> Family {
        match self {
            Outcome::LengthOfStay => Family::PoissonLog,
            Outcome::Icu | Outcome::Mortality => Family::BinomialLogit,
        }
    }

    pub fn value(self, r: &StructuredRecord) -> f64 {
        match self {
            Outcome::LengthOfStay => r.length_of_stay_days,
            Outcome::Icu => r.icu_transfer as u8 as f64,
            Outcome::Mortality => (r.discharge_disposition == DischargeDisposition::Dead) as u8 as f64,
        }
    }

    /// "relative_rate" or "odds_ratio".
    pub fn measure(self) -> &'static str {
        match self.family() {
            Family::PoissonLog => "relative_rate",
            Family::BinomialLogit => "odds_ratio",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::LengthOfStay => "length_of_stay",
            Outcome::Icu => "icu",
            Outcome::Mortality => "mortality",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortFilter {
    Full,
    DueToCovid,
    NotDueToCovid,
}

impl CohortFilter {
    pub const ALL: [CohortFilter; 3] = [CohortFilter::Full, CohortFilter::DueToCovid, CohortFilter::NotDueToCovid];

    fn keeps(self, label: bool) -> bool {
        match self {
            CohortFilter::Full => true,
            CohortFilter::DueToCovid => label,
            CohortFilter::NotDueToCovid => !label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlmSpec {
    pub outcome: Outcome,
    pub cohort: CohortFilter,
    pub adjust_age: bool,
}

impl GlmSpec {
    pub fn family(&self) -> Family {
        self.outcome.family()
    }

    /// Fits `outcome ~ vaccinated [+ age]` on the filtered rows. Unvaccinated
    /// is the reference level.
    pub fn fit(&self, records: &[StructuredRecord], labels: &[bool]) -> Result<GlmFit, AssocError> {
        let mut names = vec!["intercept".to_string(), "vaccinated".to_string()];
        if self.adjust_age {
            names.push("age_years".to_string());
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (r, &l) in records.iter().zip(labels) {
            if !self.cohort.keeps(l) {
                continue;
            }
            let mut row = vec![1.0, r.vaccinated as u8 as f64];
            if self.adjust_age {
                row.push(r.age_years);
            }
            x.push(row);
            y.push(self.outcome.value(r));
        }
        fit_glm(&x, &y, names, self.family(), MAX_ITER, TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cohort: CohortFilter,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect: Option<Effect>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionResult {
    pub beta: f64,
    pub se: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: Outcome,
    pub measure: String,
    pub cells: Vec<CellResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interaction: Option<InteractionResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub interaction_error: Option<String>,
}

impl OutcomeRow {
    pub fn cell(&self, cohort: CohortFilter) -> &CellResult {
        self.cells.iter().find(|c| c.cohort == cohort).expect("every cohort has a cell")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub adjusted_for_age: bool,
    pub rows: Vec<OutcomeRow>,
}

impl Panel {
    pub fn row(&self, outcome: Outcome) -> &OutcomeRow {
        self.rows.iter().find(|r| r.outcome == outcome).expect("every outcome has a row")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocReport {
    pub report_version: u32,
    pub n_patients: usize,
    pub n_due: usize,
    pub n_not_due: usize,
    pub ci_level: f64,
    pub panels: Vec<Panel>,
}

impl AssocReport {
    pub fn panel(&self, adjusted: bool) -> Option<&Panel> {
        self.panels.iter().find(|p| p.adjusted_for_age == adjusted)
    }
}

/// Fits `outcome ~ vaccinated + due + vaccinated:due [+ age]` on all rows
/// and returns the Wald test of the product term.
pub fn interaction_test_records(
    records: &[StructuredRecord],
    labels: &[bool],
    outcome: Outcome,
    adjust_age: bool,
) -> Result<(InteractionResult, GlmFit), AssocError> {
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(AssocError::Data("both label strata must be non-empty".into()));
    }
    let mut names: Vec<String> = ["intercept", "vaccinated", "due", "vaccinated:due"].map(String::from).to_vec();
    if adjust_age {
        names.push("age_years".into());
    }
    let mut x = Vec::with_capacity(records.len());
    for (r, &l) in records.iter().zip(labels) {
        let (v, d) = (r.vaccinated as u8 as f64, l as u8 as f64);
        let mut row = vec![1.0, v, d, v * d];
        if adjust_age {
            row.push(r.age_years);
        }
        x.push(row);
    }
    let y: Vec<f64> = records.iter().map(|r| outcome.value(r)).collect();
    let fit = fit_glm(&x, &y, names, outcome.family(), MAX_ITER, TOL)?;
    let e = fit.effect(3, LEVEL);
    Ok((InteractionResult { beta: e.beta, se: e.se, p: e.p }, fit))
}

pub fn interaction_test(dataset: &CohortDataset, outcome: Outcome, adjust_age: bool) -> Result<InteractionResult, AssocError> {
    let labels = dataset.labels().map_err(|e| AssocError::Data(e.to_string()))?;
    interaction_test_records(dataset.records(), &labels, outcome, adjust_age).map(|(r, _)| r)
}

fn panel(records: &[StructuredRecord], labels: &[bool], adjust_age: bool) -> Panel {
    let rows = Outcome::ALL
        .par_iter()
        .map(|&outcome| {
            let cells = CohortFilter::ALL
                .iter()
                .map(|&cohort| {
                    let spec = GlmSpec { outcome, cohort, adjust_age };
                    let n = labels.iter().filter(|&&l| cohort.keeps(l)).count();
                    match spec.fit(records, labels) {
                        Ok(fit) => CellResult { cohort, n, effect: Some(fit.effect(1, LEVEL)), error: None },
                        Err(e) => CellResult { cohort, n, effect: None, error: Some(format!("{outcome}/{cohort:?}: {e}")) },
                    }
                })
                .collect();
            let (interaction, interaction_error) = match interaction_test_records(records, labels, outcome, adjust_age) {
                Ok((r, _)) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            OutcomeRow { outcome, measure: outcome.measure().into(), cells, interaction, interaction_error }
        })
        .collect();
    Panel { adjusted_for_age: adjust_age, rows }
}

/// The unadjusted panel, plus the age-adjusted panel when requested. A
/// failing cell records its error and leaves the other cells intact.
pub fn run_outcome_analyses_records(records: &[StructuredRecord], labels: &[bool], adjust_age: bool) -> AssocReport {
    assert_eq!(records.len(), labels.len());
    let mut panels = vec![panel(records, labels, false)];
    if adjust_age {
        panels.push(panel(records, labels, true));
    }
    let n_due = labels.iter().filter(|&&l| l).count();
    AssocReport {
        report_version: ASSOC_REPORT_VERSION,
        n_patients: records.len(),
        n_due,
        n_not_due: records.len() - n_due,
        ci_level: LEVEL,
        panels,
    }
}

pub fn run_outcome_analyses(dataset: &CohortDataset, adjust_age: bool) -> Result<AssocReport, AssocError> {
    let labels = dataset.labels().map_err(|e| AssocError::Data(e.to_string()))?;
    Ok(run_outcome_analyses_records(dataset.records(), &labels, adjust_age))
}
