use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::EvalError;

fn split_classes(scores: &[f64], labels: &[bool]) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::OneClassOnly);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::NonFinite);
    }
    Ok((pos, neg))
}

/// For each value in `xs`: (#others strictly below, #others equal).
fn rank_counts(xs: &[f64], others_sorted: &[f64]) -> Vec<(u64, u64)> {
    xs.iter()
        .map(|&x| {
            let lo = others_sorted.partition_point(|&o| o < x);
            let hi = others_sorted.partition_point(|&o| o <= x);
            (lo as u64, (hi - lo) as u64)
        })
        .collect()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Mann-Whitney AUROC, `P(s+ > s-) + P(s+ = s-)/2`, computed from exact
/// integer pair counts.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (pos, neg) = split_classes(scores, labels)?;
    let (mut greater, mut ties) = (0u64, 0u64);
    for (g, t) in rank_counts(&pos, &sorted(&neg)) {
        greater += g;
        ties += t;
    }
    Ok((2 * greater + ties) as f64 / (2 * pos.len() as u64 * neg.len() as u64) as f64)
}

/// DeLong structural components: one per positive and one per negative.
struct Components {
    v10: Vec<f64>,
    v01: Vec<f64>,
}

fn components(scores: &[f64], labels: &[bool]) -> Result<Components, EvalError> {
    let (pos, neg) = split_classes(scores, labels)?;
    let (n1, n0) = (pos.len() as f64, neg.len() as f64);
    let v10 = rank_counts(&pos, &sorted(&neg)).into_iter().map(|(g, t)| (g as f64 + 0.5 * t as f64) / n0).collect();
    // for a negative: positives strictly above plus half the ties
    let pos_sorted = sorted(&pos);
    let v01 = neg
        .iter()
        .map(|&y| {
            let le = pos_sorted.partition_point(|&p| p <= y);
            let lt = pos_sorted.partition_point(|&p| p < y);
            ((pos.len() - le) as f64 + 0.5 * (le - lt) as f64) / n1
        })
        .collect();
    Ok(Components { v10, v01 })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    if a.len() < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AurocCi {
    pub auroc: f64,
    pub lo: f64,
    pub hi: f64,
    pub se: f64,
    pub level: f64,
}

fn z_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// AUROC with a DeLong normal-approximation interval, clamped to `[0, 1]`.
pub fn delong_ci(scores: &[f64], labels: &[bool], level: f64) -> Result<AurocCi, EvalError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EvalError::BadLevel(level));
    }
    let c = components(scores, labels)?;
    let auc = auroc(scores, labels)?;
    let var = sample_cov(&c.v10, &c.v10) / c.v10.len() as f64 + sample_cov(&c.v01, &c.v01) / c.v01.len() as f64;
    let se = var.max(0.0).sqrt();
    let z = z_quantile(level);
    Ok(AurocCi { auroc: auc, lo: (auc - z * se).clamp(0.0, 1.0), hi: (auc + z * se).clamp(0.0, 1.0), se, level })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub auroc_a: f64,
    pub auroc_b: f64,
    /// `auroc_a - auroc_b`
    pub delta: f64,
    pub z: f64,
    pub p: f64,
}

/// DeLong test for two score vectors on the same patients.
pub fn compare_auroc_paired(a: &[f64], b: &[f64], labels: &[bool]) -> Result<PairedComparison, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::PatientMismatch);
    }
    let ca = components(a, labels)?;
    let cb = components(b, labels)?;
    let (auroc_a, auroc_b) = (auroc(a, labels)?, auroc(b, labels)?);
    let delta = auroc_a - auroc_b;
    let term = |x: &[f64], y: &[f64]| {
        (sample_cov(x, x) + sample_cov(y, y) - 2.0 * sample_cov(x, y)) / x.len() as f64
    };
    let var = term(&ca.v10, &cb.v10) + term(&ca.v01, &cb.v01);
    let (z, p) = if var > 0.0 {
        let z = delta / var.sqrt();
        (z, 2.0 * Normal::standard().sf(z.abs()))
    } else if delta == 0.0 {
        (0.0, 1.0)
    } else {
        (delta.signum() * f64::INFINITY, 0.0)
    };
    Ok(PairedComparison { auroc_a, auroc_b, delta, z, p: p.clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub recall: f64,
    pub precision: f64,
    pub tp: u64,
    pub fp: u64,
}

/// Precision-recall points, one per distinct score, thresholds descending.
/// A row is called positive when its score is at least the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub n_positive: u64,
    pub n_negative: u64,
    pub points: Vec<PrPoint>,
}

pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<PrCurve, EvalError> {
    let (pos, neg) = split_classes(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let p_total = pos.len() as u64;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut points = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = order.get(k + 1).is_none_or(|&next| scores[next] != scores[i]);
        if last_of_group {
            points.push(PrPoint {
                threshold: scores[i],
                recall: tp as f64 / p_total as f64,
                precision: tp as f64 / (tp + fp) as f64,
                tp,
                fp,
            });
        }
    }
    Ok(PrCurve { n_positive: p_total, n_negative: neg.len() as u64, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub target_sensitivity: f64,
    pub threshold: f64,
    pub sensitivity: f64,
    pub ppv: f64,
}

/// Highest threshold whose recall reaches `target`.
pub fn operating_point(curve: &PrCurve, target: f64) -> Result<OperatingPoint, EvalError> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(EvalError::BadRate { name: "target_sensitivity", value: target });
    }
    // recall at the lowest threshold is 1, so a point is always found
    let pt = curve
        .points
        .iter()
        .find(|p| p.tp as f64 >= target * curve.n_positive as f64 - 1e-9 * curve.n_positive as f64)
        .ok_or(EvalError::OneClassOnly)?;
    Ok(OperatingPoint { target_sensitivity: target, threshold: pt.threshold, sensitivity: pt.recall, ppv: pt.precision })
}
