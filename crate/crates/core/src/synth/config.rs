use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ingest::{BinaryField, CategoricalField};

/// Class-conditional rate of one boolean column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTarget {
    pub column: String,
    pub incidental: f64,
    pub due: f64,
}

/// Class-conditional level proportions, in the field's declared level order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTarget {
    pub column: String,
    pub incidental: Vec<f64>,
    pub due: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeTarget {
    pub mean_incidental: f64,
    pub mean_due: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// The hidden clinical-picture bit Z and its noisy structured copy W.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentConfig {
    /// P(Z = 1 | due).
    pub p_due: f64,
    /// P(Z = 1 | incidental).
    pub p_incidental: f64,
    /// Probability that W copies Z; otherwise W is a fresh draw at the
    /// population rate of Z.
    pub structured_fidelity: f64,
}

impl LatentConfig {
    pub fn z_prevalence(&self, prevalence: f64) -> f64 {
        prevalence * self.p_due + (1.0 - prevalence) * self.p_incidental
    }

    /// (P(W = 1 | due), P(W = 1 | incidental)).
    pub fn w_rates(&self, prevalence: f64) -> (f64, f64) {
        let pi = self.z_prevalence(prevalence);
        let rho = self.structured_fidelity;
        (rho * self.p_due + (1.0 - rho) * pi, rho * self.p_incidental + (1.0 - rho) * pi)
    }
}

/// A note term with a per-patient expected count `base_rate` when Z = 0,
/// scaled by `multiplier` when Z = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTerm {
    pub term: String,
    pub base_rate: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteConfig {
    /// Notes per patient are 1 + Poisson(extra_notes_mean).
    pub extra_notes_mean: f64,
    pub tokens_per_note_mean: f64,
    pub background_size: usize,
    pub zipf_exponent: f64,
    /// Seed of the background word list, independent of the cohort seed so
    /// every cohort shares one vocabulary.
    pub lexicon_seed: u64,
}

/// Generator ground truth for the outcome models. Vaccination multiplies
/// the LOS mean by `los_rr_*` and the ICU/death odds by `*_or_*`; ICU and
/// death intercepts are solved so the class marginals match the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeTruth {
    pub los_base_due: f64,
    pub los_base_incidental: f64,
    pub los_rr_due: f64,
    pub los_rr_incidental: f64,
    pub icu_or_due: f64,
    pub icu_or_incidental: f64,
    pub mortality_or_due: f64,
    pub mortality_or_incidental: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_patients: usize,
    /// Fraction admitted due to the infection.
    pub prevalence: f64,
    pub seed: u64,
    pub latent: LatentConfig,
    pub age: AgeTarget,
    pub binary: Vec<BinaryTarget>,
    pub categorical: Vec<CategoricalTarget>,
    pub signal: Vec<SignalTerm>,
    pub notes: NoteConfig,
    pub outcomes: OutcomeTruth,
}

fn counts(c: &[u32], n: u32) -> Vec<f64> {
    c.iter().map(|&k| k as f64 / n as f64).collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        const N0: u32 = 224;
        const N1: u32 = 362;
        let binary: Vec<BinaryTarget> = [
            ("icu_transfer", 45.0, 78.0),
            ("vaccinated", 113.0, 178.0),
            ("surgery", 200.0, 302.0),
            ("cancer", 29.0, 45.0),
            ("cardiovascular", 75.0, 146.0),
            ("hypertension", 73.0, 151.0),
            ("chronic_liver", 30.0, 46.0),
            ("copd", 21.0, 50.0),
            ("asthma", 18.0, 39.0),
            ("chronic_renal", 44.0, 111.0),
            ("diabetes", 45.0, 103.0),
            // the published percentage (41.2%), which agrees with the SMD
            ("bronchodilator", 44.0, 0.412 * N1 as f64),
            ("steroid", 54.0, 233.0),
            ("anticoagulant_antiplatelet", 121.0, 284.0),
            ("diuretic", 60.0, 131.0),
            ("cough_suppressant", 44.0, 162.0),
            ("paralytic", 10.0, 30.0),
            ("expectorant", 14.0, 56.0),
            ("remdesivir", 55.0, 247.0),
            ("inhaled_steroid", 24.0, 42.0),
        ]
        .into_iter()
        .map(|(c, a, b)| BinaryTarget { column: c.into(), incidental: a / N0 as f64, due: b / N1 as f64 })
        .collect();
        let categorical: Vec<CategoricalTarget> = [
            ("sex", &[120, 104][..], &[181, 181][..]),
            ("discharge_disposition", &[18, 176, 30], &[39, 258, 65]),
            ("admission_type", &[165, 24, 35], &[346, 4, 12]),
            ("encounter_type", &[2, 180, 31, 11], &[1, 314, 35, 12]),
            ("bmi_category", &[9, 65, 85, 60, 5], &[9, 89, 147, 98, 19]),
            ("payer", &[102, 88, 21, 13], &[180, 144, 9, 29]),
            ("race_ethnicity", &[21, 106, 90, 7, 0], &[20, 175, 152, 14, 1]),
            ("lymphocyte_abs", &[1, 12, 23, 188], &[2, 47, 59, 254]),
            ("lymphocyte", &[0, 17, 131, 76], &[2, 71, 233, 56]),
            ("crp", &[62, 0, 11, 151], &[203, 0, 9, 150]),
            ("ferritin", &[39, 2, 17, 166], &[107, 3, 44, 208]),
            ("d_dimer", &[19, 0, 36, 169], &[117, 0, 156, 89]),
            ("procalcitonin", &[4, 0, 12, 208], &[22, 0, 72, 268]),
        ]
        .into_iter()
        .map(|(c, a, b)| CategoricalTarget { column: c.into(), incidental: counts(a, N0), due: counts(b, N1) })
        .collect();
        let signal = [
            ("remdesivir", 0.35, 6.0),
            ("dexamethasone", 0.35, 5.0),
            ("hypoxia", 0.3, 5.0),
            ("hypoxic", 0.3, 5.0),
            ("pneumonia", 0.4, 4.0),
            ("oxygen", 0.8, 3.0),
            ("dyspnea", 0.4, 3.0),
            ("infiltrates", 0.25, 4.0),
            ("cough", 0.6, 2.5),
            ("surgical", 1.0, 0.25),
            ("dressing", 0.8, 0.25),
            ("fracture", 0.4, 0.2),
            ("incision", 0.5, 0.25),
            ("postoperative", 0.5, 0.25),
            ("asymptomatic", 0.4, 0.3),
            ("labor", 0.2, 0.2),
        ]
        .into_iter()
        .map(|(t, b, m)| SignalTerm { term: t.into(), base_rate: b, multiplier: m })
        .collect();
        GeneratorConfig {
            n_patients: 586,
            prevalence: N1 as f64 / (N0 + N1) as f64,
            seed: 20220101,
            latent: LatentConfig { p_due: 0.9, p_incidental: 0.1, structured_fidelity: 0.85 },
            age: AgeTarget { mean_incidental: 51.9, mean_due: 62.7, sd: 18.4, min: 18.0, max: 100.0 },
            binary,
            categorical,
            signal,
            notes: NoteConfig {
                extra_notes_mean: 1.5,
                tokens_per_note_mean: 120.0,
                background_size: 3000,
                zipf_exponent: 1.0,
                lexicon_seed: 0x5eed_1e81_c0de,
            },
            // unvaccinated LOS means chosen so the class means sit near
            // 9.9 (due) and 10.2 (incidental) days
            outcomes: OutcomeTruth {
                los_base_due: 10.0,
                los_base_incidental: 12.86,
                los_rr_due: 0.98,
                los_rr_incidental: 0.59,
                icu_or_due: 1.25,
                icu_or_incidental: 0.77,
                mortality_or_due: 1.45,
                mortality_or_incidental: 0.48,
            },
        }
    }
}

fn bad(msg: impl Into<String>) -> SynthError {
    SynthError::BadConfig(msg.into())
}

fn prob(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(bad(format!("{name}={p} is not a probability")))
    }
}

impl GeneratorConfig {
    pub fn with_seed(seed: u64) -> Self {
        GeneratorConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_patients < 2 {
            return Err(bad("n_patients must be at least 2"));
        }
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(bad(format!("prevalence={} must lie in (0, 1)", self.prevalence)));
        }
        let n_due = (self.n_patients as f64 * self.prevalence).round() as usize;
        if n_due == 0 || n_due == self.n_patients {
            return Err(bad("prevalence leaves one class empty at this n_patients"));
        }
        let l = &self.latent;
        prob("latent.p_due", l.p_due)?;
        prob("latent.p_incidental", l.p_incidental)?;
        prob("latent.structured_fidelity", l.structured_fidelity)?;
        let (a, b) = l.w_rates(self.prevalence);
        if (a - b).abs() < 1e-9 {
            return Err(bad("latent rates must differ between classes"));
        }
        let age = &self.age;
        if !(age.sd > 0.0 && age.sd.is_finite() && age.min < age.max && age.mean_due.is_finite() && age.mean_incidental.is_finite()) {
            return Err(bad("age target needs sd > 0, finite means and min < max"));
        }
        for t in &self.binary {
            BinaryField::from_column(&t.column).ok_or_else(|| bad(format!("unknown binary column {:?}", t.column)))?;
            prob(&t.column, t.incidental)?;
            prob(&t.column, t.due)?;
        }
        for t in &self.categorical {
            let f = CategoricalField::from_column(&t.column)
                .ok_or_else(|| bad(format!("unknown categorical column {:?}", t.column)))?;
            for p in [&t.incidental, &t.due] {
                if p.len() != f.n_levels() {
                    return Err(bad(format!("{} needs {} level proportions", t.column, f.n_levels())));
                }
                for &v in p.iter() {
                    prob(&t.column, v)?;
                }
                if (p.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                    return Err(bad(format!("{} proportions must sum to 1", t.column)));
                }
            }
            if f == CategoricalField::DischargeDisposition && (t.incidental[1..].iter().sum::<f64>() <= 0.0 || t.due[1..].iter().sum::<f64>() <= 0.0) {
                return Err(bad("discharge_disposition needs some survivors in each class"));
            }
        }
        for s in &self.signal {
            if !(s.multiplier > 0.0 && s.multiplier.is_finite()) {
                return Err(bad(format!("signal term {:?} needs a positive multiplier", s.term)));
            }
            if !(s.base_rate >= 0.0 && s.base_rate.is_finite()) {
                return Err(bad(format!("signal term {:?} needs a non-negative base rate", s.term)));
            }
            if s.term.is_empty() || !s.term.bytes().all(|c| c.is_ascii_lowercase()) {
                return Err(bad(format!("signal term {:?} must be lowercase ASCII letters", s.term)));
            }
        }
        let n = &self.notes;
        if !(n.extra_notes_mean >= 0.0 && n.tokens_per_note_mean > 0.0 && n.background_size > 0 && n.zipf_exponent >= 0.0) {
            return Err(bad("note settings must be non-negative with a non-empty background lexicon"));
        }
        let o = &self.outcomes;
        for (name, v) in [
            ("los_base_due", o.los_base_due),
            ("los_base_incidental", o.los_base_incidental),
            ("los_rr_due", o.los_rr_due),
            ("los_rr_incidental", o.los_rr_incidental),
            ("icu_or_due", o.icu_or_due),
            ("icu_or_incidental", o.icu_or_incidental),
            ("mortality_or_due", o.mortality_or_due),
            ("mortality_or_incidental", o.mortality_or_incidental),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}
