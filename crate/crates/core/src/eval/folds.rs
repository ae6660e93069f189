use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::CohortDataset;
use crate::seed;

/// Fold index for each position in `labels`.
///
/// Stratified: positives are shuffled and dealt round-robin, then negatives
/// are shuffled and dealt continuing from the next fold, so both fold sizes
/// and per-fold positive counts differ by at most one.
pub fn assign_folds(labels: &[bool], k: usize, seed: u64, stratified: bool) -> Result<Vec<usize>, EvalError> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(EvalError::TooFewPatients { n, k });
    }
    let mut rng = seed::rng(seed);
    let mut out = vec![0; n];
    let groups: Vec<Vec<usize>> = if stratified {
        vec![
            (0..n).filter(|&i| labels[i]).collect(),
            (0..n).filter(|&i| !labels[i]).collect(),
        ]
    } else {
        vec![(0..n).collect()]
    };
    let mut next = 0;
    for mut g in groups {
        g.shuffle(&mut rng);
        for i in g {
            out[i] = next % k;
            next += 1;
        }
    }
    Ok(out)
}

/// Partition of a labeled cohort into `k` folds, keyed by patient id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub patient_ids: Vec<String>,
    pub fold_of: Vec<usize>,
}

impl CvPlan {
    /// Positions (into `patient_ids`) held out in fold `f`.
    pub fn test_positions(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == f).collect()
    }

    pub fn train_positions(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }
}

pub fn make_folds(dataset: &CohortDataset, k: usize, seed: u64, stratified: bool) -> Result<CvPlan, EvalError> {
    let labels = dataset.labels()?;
    let fold_of = assign_folds(&labels, k, seed, stratified)?;
    Ok(CvPlan { k, seed, stratified, patient_ids: dataset.patient_ids().into_iter().map(String::from).collect(), fold_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(folds: &[usize], labels: &[bool], k: usize) -> (Vec<usize>, Vec<usize>) {
        let mut size = vec![0; k];
        let mut pos = vec![0; k];
        for (&f, &l) in folds.iter().zip(labels) {
            size[f] += 1;
            pos[f] += l as usize;
        }
        (size, pos)
    }

    #[test]
    fn cohort_sized_split() {
        let labels: Vec<bool> = (0..586).map(|i| i < 362).collect();
        let folds = assign_folds(&labels, 10, 1, true).unwrap();
        let (size, pos) = counts(&folds, &labels, 10);
        assert!(size.iter().all(|&s| s == 58 || s == 59));
        assert!(pos.iter().all(|&p| p == 36 || p == 37));
    }

    #[test]
    fn leave_one_out_when_k_equals_n() {
        let labels = vec![true, false, true, false, true, false, true, false, true, false];
        let folds = assign_folds(&labels, 10, 3, true).unwrap();
        let mut sorted = folds.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn bad_k() {
        assert!(assign_folds(&[true, false], 3, 0, true).is_err());
        assert!(assign_folds(&[true, false], 1, 0, true).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let labels: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        assert_eq!(assign_folds(&labels, 5, 9, true).unwrap(), assign_folds(&labels, 5, 9, true).unwrap());
        assert_ne!(assign_folds(&labels, 5, 9, true).unwrap(), assign_folds(&labels, 5, 10, true).unwrap());
    }
}
