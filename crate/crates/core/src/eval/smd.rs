use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingest::{BinaryField, CategoricalField, CohortDataset, NumericField, StructuredRecord};

/// `|p1 - p2| / sqrt((p1 q1 + p2 q2) / 2)`.
pub fn smd_binary(p1: f64, p2: f64) -> f64 {
    let diff = (p1 - p2).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / 2.0).sqrt()
}

/// `|m1 - m2| / sqrt((s1^2 + s2^2) / 2)` with sample variances.
pub fn smd_continuous(m1: f64, var1: f64, m2: f64, var2: f64) -> f64 {
    let diff = (m1 - m2).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / ((var1 + var2) / 2.0).sqrt()
}

/// Multivariate SMD over level proportions: levels empty in both groups
/// are dropped, then the last remaining level is dropped and the
/// difference is measured in the metric of the averaged multinomial
/// covariance.
pub fn smd_categorical(counts1: &[u64], counts2: &[u64]) -> f64 {
    assert_eq!(counts1.len(), counts2.len());
    let (n1, n2) = (counts1.iter().sum::<u64>() as f64, counts2.iter().sum::<u64>() as f64);
    let kept: Vec<usize> = (0..counts1.len()).filter(|&l| counts1[l] + counts2[l] > 0).collect();
    if kept.len() < 2 {
        return 0.0;
    }
    let k = kept.len() - 1;
    let p1 = DVector::from_iterator(k, kept[..k].iter().map(|&l| counts1[l] as f64 / n1));
    let p2 = DVector::from_iterator(k, kept[..k].iter().map(|&l| counts2[l] as f64 / n2));
    let cov = |p: &DVector<f64>| DMatrix::from_diagonal(p) - p * p.transpose();
    let s = (cov(&p1) + cov(&p2)) * 0.5;
    let d = &p1 - &p2;
    if d.iter().all(|v| *v == 0.0) {
        return 0.0;
    }
    let inv = match s.clone().try_inverse() {
        Some(inv) => inv,
        None => match s.pseudo_inverse(1e-12) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        },
    };
    (d.transpose() * inv * &d)[(0, 0)].max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Proportion { count: u64, n: u64 },
    Levels { counts: Vec<(String, u64)>, n: u64 },
    Continuous { mean: f64, sd: f64, n: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdRow {
    pub variable: String,
    /// Group labeled positive (admitted due to the infection).
    pub positive: Summary,
    pub negative: Summary,
    pub smd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdTable {
    pub n_positive: u64,
    pub n_negative: u64,
    pub rows: Vec<SmdRow>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

/// Balance table between `group == true` and `group == false` records.
pub fn smd_records(records: &[StructuredRecord], group: &[bool]) -> Result<SmdTable, EvalError> {
    if records.len() != group.len() {
        return Err(EvalError::LengthMismatch { scores: records.len(), labels: group.len() });
    }
    let g1: Vec<&StructuredRecord> = records.iter().zip(group).filter(|(_, &g)| g).map(|(r, _)| r).collect();
    let g0: Vec<&StructuredRecord> = records.iter().zip(group).filter(|(_, &g)| !g).map(|(r, _)| r).collect();
    if g1.is_empty() || g0.is_empty() {
        return Err(EvalError::EmptyGroup);
    }
    let mut rows = Vec::new();
    for f in NumericField::ALL {
        let a: Vec<f64> = g1.iter().map(|r| r.numeric(f)).collect();
        let b: Vec<f64> = g0.iter().map(|r| r.numeric(f)).collect();
        let ((ma, va), (mb, vb)) = (mean_var(&a), mean_var(&b));
        rows.push(SmdRow {
            variable: f.column().to_string(),
            positive: Summary::Continuous { mean: ma, sd: va.sqrt(), n: a.len() as u64 },
            negative: Summary::Continuous { mean: mb, sd: vb.sqrt(), n: b.len() as u64 },
            smd: smd_continuous(ma, va, mb, vb),
        });
    }
    for f in CategoricalField::ALL {
        let count = |g: &[&StructuredRecord]| {
            let mut c = vec![0u64; f.n_levels()];
            for r in g {
                c[r.level(f)] += 1;
            }
            c
        };
        let (ca, cb) = (count(&g1), count(&g0));
        let named = |c: &[u64]| f.levels().iter().zip(c).map(|(l, &n)| (l.to_string(), n)).collect();
        rows.push(SmdRow {
            variable: f.column().to_string(),
            positive: Summary::Levels { counts: named(&ca), n: g1.len() as u64 },
            negative: Summary::Levels { counts: named(&cb), n: g0.len() as u64 },
            smd: smd_categorical(&ca, &cb),
        });
    }
    for f in BinaryField::ALL {
        let a = g1.iter().filter(|r| r.binary(f)).count() as u64;
        let b = g0.iter().filter(|r| r.binary(f)).count() as u64;
        rows.push(SmdRow {
            variable: f.column().to_string(),
            positive: Summary::Proportion { count: a, n: g1.len() as u64 },
            negative: Summary::Proportion { count: b, n: g0.len() as u64 },
            smd: smd_binary(a as f64 / g1.len() as f64, b as f64 / g0.len() as f64),
        });
    }
    Ok(SmdTable { n_positive: g1.len() as u64, n_negative: g0.len() as u64, rows })
}

/// Balance table grouped by the adjudicated label.
pub fn smd(dataset: &CohortDataset) -> Result<SmdTable, EvalError> {
    smd_records(dataset.records(), &dataset.labels()?)
}

impl SmdTable {
    pub fn row(&self, variable: &str) -> Option<&SmdRow> {
        self.rows.iter().find(|r| r.variable == variable)
    }

    /// Fixed-width text rendering with the same numbers as the JSON form.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<28} {:>22} {:>22} {:>8}\n",
            "variable",
            format!("due (n={})", self.n_positive),
            format!("not due (n={})", self.n_negative),
            "smd"
        );
        let fmt = |s: &Summary| match s {
            Summary::Proportion { count, n } => format!("{count} ({:.1}%)", 100.0 * *count as f64 / *n as f64),
            Summary::Continuous { mean, sd, .. } => format!("{mean:.1} ({sd:.1})"),
            Summary::Levels { .. } => String::new(),
        };
        for r in &self.rows {
            out.push_str(&format!("{:<28} {:>22} {:>22} {:>8.3}\n", r.variable, fmt(&r.positive), fmt(&r.negative), r.smd));
            if let (Summary::Levels { counts: a, n: na }, Summary::Levels { counts: b, n: nb }) = (&r.positive, &r.negative) {
                for ((level, ca), (_, cb)) in a.iter().zip(b) {
                    out.push_str(&format!(
                        "  {:<26} {:>22} {:>22}\n",
                        level,
                        format!("{ca} ({:.1}%)", 100.0 * *ca as f64 / *na as f64),
                        format!("{cb} ({:.1}%)", 100.0 * *cb as f64 / *nb as f64)
                    ));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 0.0005 + 1e-12
    }

    #[test]
    fn published_binary_rows() {
        assert!(close(smd_binary(247.0 / 362.0, 55.0 / 224.0), 0.974));
        assert!(close(smd_binary(233.0 / 362.0, 54.0 / 224.0), 0.887));
        assert!(close(smd_binary(181.0 / 362.0, 120.0 / 224.0), 0.072));
        assert!(close(smd_categorical(&[181, 181], &[120, 104]), 0.072));
    }

    #[test]
    fn published_multilevel_rows() {
        let cases: &[(&[u64], &[u64], f64)] = &[
            (&[39, 258, 65], &[18, 176, 30], 0.169),
            (&[346, 4, 12], &[165, 24, 35], 0.641),
            (&[1, 314, 35, 12], &[2, 180, 31, 11], 0.181),
            (&[20, 175, 152, 14, 1], &[21, 106, 90, 7, 0], 0.168),
            (&[9, 89, 147, 98, 19], &[9, 65, 85, 60, 5], 0.203),
            (&[180, 144, 9, 29], &[102, 88, 21, 13], 0.305),
            (&[2, 47, 59, 254], &[1, 12, 23, 188], 0.345),
            (&[71, 233, 56, 2], &[17, 131, 76, 0], 0.528),
            (&[203, 9, 150], &[62, 11, 151], 0.602),
            (&[107, 3, 44, 208], &[39, 2, 17, 166], 0.361),
            (&[117, 156, 89], &[19, 36, 169], 1.187),
            (&[22, 268, 72], &[4, 208, 12], 0.524),
        ];
        for (a, b, want) in cases {
            let got = smd_categorical(a, b);
            assert!(close(got, *want), "{a:?} vs {b:?}: {got} != {want}");
        }
    }

    #[test]
    fn symmetric_and_affine_invariant() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let b = [3.0, 3.5, 9.0];
        let (ma, va) = mean_var(&a);
        let (mb, vb) = mean_var(&b);
        let s = smd_continuous(ma, va, mb, vb);
        assert_eq!(s, smd_continuous(mb, vb, ma, va));
        let scale = |v: &[f64]| v.iter().map(|x| 3.0 * x - 7.0).collect::<Vec<_>>();
        let ((ma2, va2), (mb2, vb2)) = (mean_var(&scale(&a)), mean_var(&scale(&b)));
        assert!((smd_continuous(ma2, va2, mb2, vb2) - s).abs() < 1e-12);
        assert_eq!(smd_categorical(&[3, 5, 2], &[1, 1, 6]), smd_categorical(&[1, 1, 6], &[3, 5, 2]));
    }

    #[test]
    fn identical_groups_give_zero_everywhere() {
        let mut recs = Vec::new();
        for i in 0..6 {
            let mut r = StructuredRecord::blank(format!("p{i}"));
            r.age_years = 30.0 + (i / 2) as f64;
            r.vaccinated = (i / 2) % 2 == 0;
            recs.push(r);
        }
        let group: Vec<bool> = (0..6).map(|i| i % 2 == 0).collect();
        let t = smd_records(&recs, &group).unwrap();
        assert!(t.rows.iter().all(|r| r.smd == 0.0), "{:?}", t.rows.iter().map(|r| r.smd).collect::<Vec<_>>());
        assert_eq!(smd_records(&recs, &[true; 6]), Err(EvalError::EmptyGroup));
        assert!(t.to_text().contains("age_years"));
    }
}
