use serde::{Deserialize, Serialize};

use super::{GeneratorConfig, SynthError};
use crate::ingest::{BinaryField, CategoricalField, CohortDataset, StructuredRecord};

/// Flag threshold in binomial standard errors.
const FLAG_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub variable: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level: Option<String>,
    /// "due" or "incidental".
    pub class: String,
    pub n: usize,
    pub target: f64,
    pub observed: f64,
    pub delta: f64,
    pub se: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub rows: Vec<CalibrationRow>,
    /// `variable[=level]/class` for every flagged row.
    pub flags: Vec<String>,
    pub passed: bool,
}

fn row(variable: &str, level: Option<&str>, class: &str, n: usize, target: f64, observed: f64, se: f64) -> CalibrationRow {
    let delta = observed - target;
    CalibrationRow {
        variable: variable.to_string(),
        level: level.map(str::to_string),
        class: class.to_string(),
        n,
        target,
        observed,
        delta,
        se,
        // a zero-variance target is only met exactly
        flagged: delta.abs() > FLAG_SE * se + 1e-12,
    }
}

/// Observed class-conditional rates against the config targets; a row is
/// flagged when it misses by more than three binomial standard errors.
pub fn calibration_report_records(records: &[StructuredRecord], labels: &[bool], cfg: &GeneratorConfig) -> CalibrationReport {
    let mut rows = Vec::new();
    for (class, due) in [("due", true), ("incidental", false)] {
        let group: Vec<&StructuredRecord> = records.iter().zip(labels).filter(|(_, &l)| l == due).map(|(r, _)| r).collect();
        let n = group.len();
        if n == 0 {
            continue;
        }
        let nf = n as f64;
        let pick = |inc: f64, d: f64| if due { d } else { inc };
        for t in &cfg.binary {
            let Some(f) = BinaryField::from_column(&t.column) else { continue };
            let target = pick(t.incidental, t.due);
            let observed = group.iter().filter(|r| r.binary(f)).count() as f64 / nf;
            rows.push(row(&t.column, None, class, n, target, observed, (target * (1.0 - target) / nf).sqrt()));
        }
        for t in &cfg.categorical {
            let Some(f) = CategoricalField::from_column(&t.column) else { continue };
            let targets = if due { &t.due } else { &t.incidental };
            for (l, name) in f.levels().into_iter().enumerate() {
                let target = targets[l];
                let observed = group.iter().filter(|r| r.level(f) == l).count() as f64 / nf;
                rows.push(row(&t.column, Some(name), class, n, target, observed, (target * (1.0 - target) / nf).sqrt()));
            }
        }
        let target = pick(cfg.age.mean_incidental, cfg.age.mean_due);
        let observed = group.iter().map(|r| r.age_years).sum::<f64>() / nf;
        rows.push(row("age_years", None, class, n, target, observed, cfg.age.sd / nf.sqrt()));
    }
    let flags: Vec<String> = rows
        .iter()
        .filter(|r| r.flagged)
        .map(|r| match &r.level {
            Some(l) => format!("{}={}/{}", r.variable, l, r.class),
            None => format!("{}/{}", r.variable, r.class),
        })
        .collect();
    CalibrationReport { passed: flags.is_empty(), rows, flags }
}

pub fn calibration_report(dataset: &CohortDataset, cfg: &GeneratorConfig) -> Result<CalibrationReport, SynthError> {
    let labels = dataset.labels().map_err(|_| SynthError::Unlabeled)?;
    Ok(calibration_report_records(dataset.records(), &labels, cfg))
}
