mod common;

use common::*;
use phenorule::eval::{auroc, compare_auroc_paired, cross_validate, delong_ci, make_folds, pr_curve};
use phenorule::pipeline::{ModelSpec, PipelineConfig, PreparedCohort};
use phenorule::synth::{generate_cohort, GeneratorConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_set(seed: u64, n: usize, tie_grid: Option<u32>) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.4)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = labels
        .iter()
        .map(|&l| {
            let s: f64 = r.random::<f64>() + if l { 0.3 } else { 0.0 };
            match tie_grid {
                Some(g) => (s * g as f64).round() / g as f64,
                None => s,
            }
        })
        .collect();
    (scores, labels)
}

#[test]
fn auroc_matches_pair_counting_up_to_n_200() {
    for n in 2..=200 {
        for (k, grid) in [None, Some(5), Some(40)].into_iter().enumerate() {
            let (s, l) = random_set(n as u64 * 7 + k as u64, n, grid);
            assert_eq!(auroc(&s, &l).unwrap(), auroc_pairs(&s, &l), "n={n} grid={grid:?}");
        }
    }
}

proptest! {
    #[test]
    fn auroc_exact_on_arbitrary_sets(
        data in prop::collection::vec((0u8..20, any::<bool>()), 2..200)
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 7.0).collect();
        let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), auroc_pairs(&scores, &labels));
    }

    #[test]
    fn auroc_invariant_under_increasing_transforms(seed in 0u64..10_000, n in 4usize..150) {
        let (s, l) = random_set(seed, n, Some(30));
        let base = auroc(&s, &l).unwrap();
        let exp: Vec<f64> = s.iter().map(|v| v.exp()).collect();
        let scaled: Vec<f64> = s.iter().map(|v| v * 1000.0).collect();
        let ranked = rank_normalize(&s);
        prop_assert_eq!(auroc(&exp, &l).unwrap(), base);
        prop_assert_eq!(auroc(&scaled, &l).unwrap(), base);
        prop_assert_eq!(auroc(&ranked, &l).unwrap(), base);
    }

    #[test]
    fn precision_at_full_recall_is_prevalence(seed in 0u64..10_000, n in 2usize..150) {
        let (s, l) = random_set(seed, n, Some(10));
        let curve = pr_curve(&s, &l).unwrap();
        let last = curve.points.last().unwrap();
        let prevalence = l.iter().filter(|&&v| v).count() as f64 / l.len() as f64;
        prop_assert_eq!(last.recall, 1.0);
        prop_assert_eq!(last.precision, prevalence);
    }
}

#[test]
fn delong_interval_agrees_with_bootstrap() {
    for k in 0..10u64 {
        let gap = 0.6 + 0.15 * k as f64;
        let (s, l) = scored_set(200, 0.4 + 0.02 * k as f64, gap, 500 + k);
        let ci = delong_ci(&s, &l, 0.95).unwrap();
        let (lo, hi) = bootstrap_ci(&s, &l, 2000, 0.95, 900 + k);
        assert!((ci.lo - lo).abs() <= 0.02, "set {k}: delong lo {} vs bootstrap {lo}", ci.lo);
        assert!((ci.hi - hi).abs() <= 0.02, "set {k}: delong hi {} vs bootstrap {hi}", ci.hi);
    }
}

/// Two noisy readings of the same labels with a known gap in separation.
fn paired_scenario(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let labels: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
    let mut draw = |w: f64| -> Vec<f64> {
        labels
            .iter()
            .map(|&l| {
                let z: f64 = StandardNormal.sample(&mut r);
                w * l as u8 as f64 + z
            })
            .collect::<Vec<f64>>()
    };
    let a = draw(1.0);
    let b = draw(0.75);
    (rank_normalize(&a), rank_normalize(&b), labels)
}

#[test]
fn paired_test_agrees_with_permutation() {
    for seed in [11u64, 12, 13] {
        let (a, b, l) = paired_scenario(seed);
        let delong = compare_auroc_paired(&a, &b, &l).unwrap().p;
        let perm = permutation_paired_p(&a, &b, &l, 10_000, seed + 100);
        assert!((delong - perm).abs() <= 0.02, "seed {seed}: delong {delong} vs permutation {perm}");
    }
}

#[test]
fn out_of_fold_bookkeeping() {
    let cfg = GeneratorConfig { n_patients: 150, ..GeneratorConfig::default() };
    let d = generate_cohort(&cfg).unwrap();
    let prep = PreparedCohort::new(&d, Default::default()).unwrap();
    let plan = make_folds(&d, 5, 3, true).unwrap();
    let spec: ModelSpec = "structured:forest".parse().unwrap();
    let mut config = PipelineConfig::default();
    config.hyperparams.forest.n_trees = 20;
    let res = cross_validate(&prep, spec, &config, &plan).unwrap();
    assert_eq!(res.predictions.entries.len(), d.len());
    let mut seen = std::collections::HashSet::new();
    for (i, e) in res.predictions.entries.iter().enumerate() {
        assert!(seen.insert(e.patient_id.clone()), "{} predicted twice", e.patient_id);
        assert_eq!(e.patient_id, plan.patient_ids[i]);
        // the fold that produced the prediction is the one holding the patient out
        assert_eq!(e.fold, plan.fold_of[i]);
        assert!(!plan.train_positions(e.fold).contains(&i));
    }
    for f in &res.folds {
        assert_eq!(f.n_train + f.n_test, d.len());
        assert_eq!(f.n_test, plan.test_positions(f.fold).len());
    }
}
