use phenorule::assoc::{interaction_test_records, run_outcome_analyses_records, CohortFilter, GlmSpec, Outcome};
use phenorule::ingest::DischargeDisposition;
use phenorule::synth::{generate_cohort, GeneratorConfig};

fn cohort(cfg: &GeneratorConfig) -> (Vec<phenorule::ingest::StructuredRecord>, Vec<bool>) {
    let d = generate_cohort(cfg).unwrap();
    (d.records().to_vec(), d.labels().unwrap())
}

fn covers(lo: f64, hi: f64, truth: f64) -> bool {
    lo <= truth && truth <= hi
}

#[test]
fn null_exposure_intervals_cover_one() {
    let mut cfg = GeneratorConfig::default();
    let o = &mut cfg.outcomes;
    (o.los_rr_due, o.los_rr_incidental) = (1.0, 1.0);
    (o.icu_or_due, o.icu_or_incidental) = (1.0, 1.0);
    (o.mortality_or_due, o.mortality_or_incidental) = (1.0, 1.0);
    let mut hits = [[0usize; 2]; 3];
    let mut fits = [[0usize; 2]; 3];
    for seed in 0..100 {
        let (records, labels) = cohort(&GeneratorConfig { seed, ..cfg.clone() });
        for (k, outcome) in [Outcome::LengthOfStay, Outcome::Icu, Outcome::Mortality].into_iter().enumerate() {
            for (s, stratum) in [CohortFilter::DueToCovid, CohortFilter::NotDueToCovid].into_iter().enumerate() {
                let spec = GlmSpec { outcome, cohort: stratum, adjust_age: false };
                if let Ok(fit) = spec.fit(&records, &labels) {
                    fits[k][s] += 1;
                    let e = fit.effect(1, 0.95);
                    hits[k][s] += covers(e.lo, e.hi, 1.0) as usize;
                }
            }
        }
    }
    for k in 0..3 {
        for s in 0..2 {
            assert!(fits[k][s] >= 95, "outcome {k} stratum {s}: only {} fits", fits[k][s]);
            let rate = hits[k][s] as f64 / fits[k][s] as f64;
            assert!(rate >= 0.90, "outcome {k} stratum {s}: coverage {rate}");
        }
    }
}

#[test]
fn interaction_has_power_against_generator_truth() {
    let mut rejections = 0;
    for seed in 0..50 {
        let (records, labels) = cohort(&GeneratorConfig { seed: 1000 + seed, ..GeneratorConfig::default() });
        let (res, _) = interaction_test_records(&records, &labels, Outcome::LengthOfStay, false).unwrap();
        rejections += (res.p < 0.05) as usize;
    }
    assert!(rejections >= 40, "{rejections}/50 rejections");
}

#[test]
fn stratum_rates_center_on_generator_truth() {
    let cfg = GeneratorConfig::default();
    let truth = [cfg.outcomes.los_rr_due, cfg.outcomes.los_rr_incidental];
    let mut sums = [0.0; 2];
    let mut sq = [0.0; 2];
    let runs = 40;
    for seed in 0..runs {
        let (records, labels) = cohort(&GeneratorConfig { seed: 2000 + seed, ..cfg.clone() });
        let report = run_outcome_analyses_records(&records, &labels, false);
        let row = report.panel(false).unwrap().row(Outcome::LengthOfStay);
        for (s, stratum) in [CohortFilter::DueToCovid, CohortFilter::NotDueToCovid].into_iter().enumerate() {
            let b = row.cell(stratum).effect.unwrap().beta;
            sums[s] += b;
            sq[s] += b * b;
        }
    }
    for s in 0..2 {
        let n = runs as f64;
        let mean = sums[s] / n;
        let sd = ((sq[s] - n * mean * mean) / (n - 1.0)).sqrt();
        // Monte Carlo interval for the mean log rate ratio
        let half = 3.0 * sd / n.sqrt();
        assert!((mean - truth[s].ln()).abs() <= half, "stratum {s}: mean log RR {mean} vs {}", truth[s].ln());
    }
}

#[test]
fn product_term_reproduces_due_stratum_odds_ratio() {
    let (records, labels) = cohort(&GeneratorConfig::default());
    let (_, fit) = interaction_test_records(&records, &labels, Outcome::Mortality, false).unwrap();
    let mut t = [[0.0f64; 2]; 2];
    for (r, &l) in records.iter().zip(&labels) {
        if l {
            let dead = r.discharge_disposition == DischargeDisposition::Dead;
            t[r.vaccinated as usize][dead as usize] += 1.0;
        }
    }
    let closed = (t[1][1] * t[0][0]) / (t[1][0] * t[0][1]);
    let model = (fit.beta[1] + fit.beta[3]).exp();
    assert!((model - closed).abs() < 1e-8 * closed, "{model} vs {closed}");
}
