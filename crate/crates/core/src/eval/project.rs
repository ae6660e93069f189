use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpProjection {
    pub n_screened: u64,
    pub prevalence: f64,
    pub sensitivity: f64,
    pub ppv: f64,
    pub true_positives: f64,
    pub false_positives: f64,
    pub false_positives_rounded: u64,
}

/// Expected false positives when a rule with the given sensitivity and PPV
/// screens `n_screened` admissions: `TP = n * prevalence * sensitivity`,
/// `FP = TP * (1 - ppv) / ppv`.
pub fn project_false_positives(
    n_screened: u64,
    prevalence: f64,
    sensitivity: f64,
    ppv: f64,
) -> Result<FpProjection, EvalError> {
    for (name, value) in [("prevalence", prevalence), ("sensitivity", sensitivity), ("ppv", ppv)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(EvalError::BadRate { name, value });
        }
    }
    let tp = n_screened as f64 * prevalence * sensitivity;
    let fp = tp * (1.0 - ppv) / ppv;
    Ok(FpProjection {
        n_screened,
        prevalence,
        sensitivity,
        ppv,
        true_positives: tp,
        false_positives: fp,
        false_positives_rounded: fp.round() as u64,
    })
}
