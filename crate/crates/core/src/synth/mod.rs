//! Labeled synthetic cohorts calibrated to the published cohort description.
//!
//! Each patient carries a hidden "clinical picture" bit Z that agrees with
//! the label most of the time. Notes are written from Z and structured
//! fields from a noisier copy W of Z, so both views are informative but
//! neither recovers the label perfectly, and the notes view is the sharper
//! one. Every class-conditional marginal still equals its configured
//! target. Outcomes (length of stay, ICU transfer, death) depend only on
//! the label stratum and vaccination.

mod calibration;
mod config;
mod notes;

pub use calibration::{calibration_report, calibration_report_records, CalibrationReport, CalibrationRow};
pub use config::{
    AgeTarget, BinaryTarget, CategoricalTarget, GeneratorConfig, LatentConfig, NoteConfig, OutcomeTruth, SignalTerm,
};
pub use notes::Lexicon;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{
    join_cohort, write_labels, write_notes, write_structured, AdjudicatedLabel, BinaryField, CategoricalField,
    CohortDataset, DischargeDisposition, NoteDocument, StructuredRecord,
};
use crate::learn::lasso::sigmoid;
use crate::seed;

pub const CONFIG_ECHO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(String),
    #[error("cohort is unlabeled")]
    Unlabeled,
    #[error("io: {0}")]
    Io(String),
}

const LABEL_STREAM: u64 = 1;
const PATIENT_STREAM: u64 = 2;

/// How one structured variable is drawn.
#[derive(Debug, Clone)]
enum Source {
    /// Level probabilities given W = 0 and W = 1.
    Latent([Vec<f64>; 2]),
    /// Level probabilities given the label, used when no valid latent
    /// conditionals reproduce the targets.
    Direct { incidental: Vec<f64>, due: Vec<f64> },
}

impl Source {
    fn build(incidental: &[f64], due: &[f64], a: f64, b: f64) -> Source {
        // solve t_due = a q1 + (1-a) q0, t_inc = b q1 + (1-b) q0
        let d: Vec<f64> = incidental.iter().zip(due).map(|(t0, t1)| (t1 - t0) / (a - b)).collect();
        let q0: Vec<f64> = incidental.iter().zip(&d).map(|(t0, d)| t0 - b * d).collect();
        let q1: Vec<f64> = q0.iter().zip(&d).map(|(q, d)| q + d).collect();
        let ok = |q: &[f64]| q.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v));
        if ok(&q0) && ok(&q1) {
            let clean = |q: Vec<f64>| q.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
            Source::Latent([clean(q0), clean(q1)])
        } else {
            Source::Direct { incidental: incidental.to_vec(), due: due.to_vec() }
        }
    }

    fn probs(&self, due: bool, w: bool) -> &[f64] {
        match self {
            Source::Latent(q) => &q[w as usize],
            Source::Direct { incidental, due: d } => {
                if due {
                    d
                } else {
                    incidental
                }
            }
        }
    }
}

fn draw_level(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Intercept `alpha` such that `(1-v) s(alpha) + v s(alpha + ln or)` equals
/// `target`, where `v` is the exposure prevalence.
fn logistic_intercept(target: f64, v: f64, or: f64) -> f64 {
    let beta = or.ln();
    let f = |a: f64| (1.0 - v) * sigmoid(a) + v * sigmoid(a + beta) - target;
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Everything derived from the config once per cohort.
struct Plan {
    binary: Vec<(BinaryField, Source)>,
    categorical: Vec<(CategoricalField, Source)>,
    age: [f64; 2],
    icu_alpha: [f64; 2],
    mortality_alpha: [f64; 2],
    /// P(Home | alive) per stratum.
    home_given_alive: [f64; 2],
    w_prevalence: f64,
}

impl Plan {
    fn new(cfg: &GeneratorConfig) -> Plan {
        let (a, b) = cfg.latent.w_rates(cfg.prevalence);
        let mut binary = Vec::new();
        let mut vacc = [0.0; 2];
        let mut icu = [0.0; 2];
        for t in &cfg.binary {
            let f = BinaryField::from_column(&t.column).expect("validated");
            match f {
                BinaryField::IcuTransfer => icu = [t.incidental, t.due],
                _ => {
                    if f == BinaryField::Vaccinated {
                        vacc = [t.incidental, t.due];
                    }
                    let s = Source::build(&[1.0 - t.incidental, t.incidental], &[1.0 - t.due, t.due], a, b);
                    binary.push((f, s));
                }
            }
        }
        let mut categorical = Vec::new();
        let mut dead = [0.0; 2];
        let mut home = [0.0; 2];
        for t in &cfg.categorical {
            let f = CategoricalField::from_column(&t.column).expect("validated");
            if f == CategoricalField::DischargeDisposition {
                for (k, p) in [&t.incidental, &t.due].into_iter().enumerate() {
                    let total: f64 = p.iter().sum();
                    dead[k] = p[0] / total;
                    home[k] = p[1] / (p[1] + p[2]);
                }
            } else {
                categorical.push((f, Source::build(&t.incidental, &t.due, a, b)));
            }
        }
        let o = &cfg.outcomes;
        let d_age = (cfg.age.mean_due - cfg.age.mean_incidental) / (a - b);
        let age0 = cfg.age.mean_incidental - b * d_age;
        Plan {
            binary,
            categorical,
            age: [age0, age0 + d_age],
            icu_alpha: [
                logistic_intercept(icu[0], vacc[0], o.icu_or_incidental),
                logistic_intercept(icu[1], vacc[1], o.icu_or_due),
            ],
            mortality_alpha: [
                logistic_intercept(dead[0], vacc[0], o.mortality_or_incidental),
                logistic_intercept(dead[1], vacc[1], o.mortality_or_due),
            ],
            home_given_alive: home,
            w_prevalence: cfg.latent.z_prevalence(cfg.prevalence),
        }
    }
}

fn patient_id(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("P{:0width$}", i + 1)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

fn generate_patient(
    cfg: &GeneratorConfig,
    plan: &Plan,
    lexicon: &Lexicon,
    i: usize,
    due: bool,
) -> (StructuredRecord, Vec<NoteDocument>) {
    let mut rng = seed::rng(seed::derive_path(cfg.seed, &[PATIENT_STREAM, i as u64]));
    let l = &cfg.latent;
    let z = rng.random_bool(if due { l.p_due } else { l.p_incidental });
    let w = if rng.random_bool(l.structured_fidelity) { z } else { rng.random_bool(plan.w_prevalence) };
    let s = due as usize;

    let id = patient_id(i, cfg.n_patients);
    let mut r = StructuredRecord::blank(id.clone());
    for (f, src) in &plan.binary {
        r.set_binary(*f, draw_level(&mut rng, src.probs(due, w)) == 1);
    }
    for (f, src) in &plan.categorical {
        r.set_level(*f, draw_level(&mut rng, src.probs(due, w)));
    }
    let age = Normal::new(plan.age[w as usize], cfg.age.sd).expect("validated sd").sample(&mut rng);
    r.age_years = age.clamp(cfg.age.min, cfg.age.max).round();

    let o = &cfg.outcomes;
    let v = r.vaccinated as u8 as f64;
    let (base, rr) = if due { (o.los_base_due, o.los_rr_due) } else { (o.los_base_incidental, o.los_rr_incidental) };
    r.length_of_stay_days = poisson(&mut rng, base * rr.powf(v)) as f64;
    let (icu_or, mort_or) = if due { (o.icu_or_due, o.mortality_or_due) } else { (o.icu_or_incidental, o.mortality_or_incidental) };
    r.icu_transfer = rng.random_bool(sigmoid(plan.icu_alpha[s] + v * icu_or.ln()));
    r.discharge_disposition = if rng.random_bool(sigmoid(plan.mortality_alpha[s] + v * mort_or.ln())) {
        DischargeDisposition::Dead
    } else if rng.random_bool(plan.home_given_alive[s]) {
        DischargeDisposition::Home
    } else {
        DischargeDisposition::OtherFacility
    };

    let notes = notes::write_notes(&mut rng, &cfg.notes, &cfg.signal, lexicon, z, &id);
    (r, notes)
}

/// Draws a labeled cohort. `(config, config.seed)` fixes every byte.
pub fn generate_cohort(cfg: &GeneratorConfig) -> Result<CohortDataset, SynthError> {
    cfg.validate()?;
    let n = cfg.n_patients;
    let n_due = ((n as f64) * cfg.prevalence).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_due).collect();
    labels.shuffle(&mut seed::rng(seed::derive_seed(cfg.seed, LABEL_STREAM)));

    let plan = Plan::new(cfg);
    let lexicon = Lexicon::new(&cfg.notes, &cfg.signal);
    let patients: Vec<(StructuredRecord, Vec<NoteDocument>)> =
        (0..n).into_par_iter().map(|i| generate_patient(cfg, &plan, &lexicon, i, labels[i])).collect();

    let mut records = Vec::with_capacity(n);
    let mut all_notes = Vec::new();
    for (r, ns) in patients {
        records.push(r);
        all_notes.extend(ns);
    }
    let label_rows = records
        .iter()
        .zip(&labels)
        .map(|(r, &due)| AdjudicatedLabel { patient_id: r.patient_id.clone(), due_to_covid: due })
        .collect();
    let (dataset, _) = join_cohort(records, all_notes, Some(label_rows)).map_err(|e| SynthError::BadConfig(e.to_string()))?;
    Ok(dataset)
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    format_version: u32,
    config: &'a GeneratorConfig,
}

/// Writes `structured.csv`, `notes.jsonl`, `labels.csv` and
/// `config-echo.json` into `dir`, creating it if needed.
pub fn write_cohort(dir: &Path, dataset: &CohortDataset, cfg: &GeneratorConfig) -> Result<(), SynthError> {
    let io = |e: &dyn std::fmt::Display| SynthError::Io(e.to_string());
    fs::create_dir_all(dir).map_err(|e| io(&e))?;
    write_structured(dir.join("structured.csv"), dataset.records()).map_err(|e| io(&e))?;
    write_notes(dir.join("notes.jsonl"), &dataset.all_notes()).map_err(|e| io(&e))?;
    write_labels(dir.join("labels.csv"), &dataset.label_list()).map_err(|e| io(&e))?;
    let echo = ConfigEcho { format_version: CONFIG_ECHO_VERSION, config: cfg };
    let mut json = serde_json::to_string_pretty(&echo).map_err(|e| io(&e))?;
    json.push('\n');
    fs::write(dir.join("config-echo.json"), json).map_err(|e| io(&e))?;
    Ok(())
}
