use phenorule::ingest::{join_cohort, read_structured, write_structured_to, CohortDataset, NoteDocument};
use phenorule::synth::{generate_cohort, GeneratorConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cohort(seed: u64, n: usize) -> CohortDataset {
    generate_cohort(&GeneratorConfig { n_patients: n, seed, ..GeneratorConfig::default() }).unwrap()
}

fn same(a: &CohortDataset, b: &CohortDataset) -> bool {
    a.records() == b.records() && a.notes_by_patient() == b.notes_by_patient() && a.label_list() == b.label_list()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn structured_csv_round_trips(
        seed in 0u64..1_000,
        ages in prop::collection::vec(0.0f64..130.0, 12),
        stays in prop::collection::vec(0.0f64..400.0, 12),
    ) {
        let d = cohort(seed, 12);
        let mut records = d.records().to_vec();
        for ((r, a), s) in records.iter_mut().zip(&ages).zip(&stays) {
            r.age_years = *a;
            r.length_of_stay_days = *s;
        }
        let mut first = Vec::new();
        write_structured_to(&mut first, &records).unwrap();
        let loaded = read_structured(first.as_slice()).unwrap();
        prop_assert_eq!(&loaded, &records);
        let mut second = Vec::new();
        write_structured_to(&mut second, &loaded).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn join_is_idempotent_and_ignores_cross_patient_note_order(seed in 0u64..1_000) {
        let d = cohort(seed, 25);
        let (again, _) = join_cohort(d.records().to_vec(), d.all_notes(), Some(d.label_list())).unwrap();
        prop_assert!(same(&d, &again));

        // shuffle whole patients' note lists, keeping each patient's own order
        let mut groups: Vec<Vec<NoteDocument>> = d.notes_by_patient().values().cloned().collect();
        groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let mut interleaved = Vec::new();
        let mut cursors: Vec<std::vec::IntoIter<NoteDocument>> = groups.into_iter().map(|g| g.into_iter()).collect();
        while !cursors.is_empty() {
            cursors.shuffle(&mut rng);
            match cursors[0].next() {
                Some(n) => interleaved.push(n),
                None => {
                    cursors.swap_remove(0);
                }
            }
        }
        let mut labels = d.label_list();
        labels.reverse();
        let (shuffled, _) = join_cohort(d.records().to_vec(), interleaved, Some(labels)).unwrap();
        prop_assert!(same(&d, &shuffled));
    }
}
