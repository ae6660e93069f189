//! Reference computations written independently of the library, plus
//! helpers for driving the binary.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// AUROC by counting every positive/negative pair, ties worth one half.
pub fn auroc_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval from resampling positives and negatives separately.
pub fn bootstrap_ci(scores: &[f64], labels: &[bool], reps: usize, level: f64, seed: u64) -> (f64, f64) {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| !l).map(|(s, _)| *s).collect();
    let mut r = rng(seed);
    let mut stats = Vec::with_capacity(reps);
    for _ in 0..reps {
        let mut s = Vec::with_capacity(scores.len());
        let mut l = Vec::with_capacity(scores.len());
        for _ in 0..pos.len() {
            s.push(pos[r.random_range(0..pos.len())]);
            l.push(true);
        }
        for _ in 0..neg.len() {
            s.push(neg[r.random_range(0..neg.len())]);
            l.push(false);
        }
        stats.push(auroc_pairs(&s, &l));
    }
    stats.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (quantile(&stats, a), quantile(&stats, 1.0 - a))
}

/// Two-sided paired permutation test: each patient's two scores are swapped
/// with probability one half.
pub fn permutation_paired_p(a: &[f64], b: &[f64], labels: &[bool], draws: usize, seed: u64) -> f64 {
    let observed = (auroc_pairs(a, labels) - auroc_pairs(b, labels)).abs();
    let mut r = rng(seed);
    let mut hits = 0;
    let (mut pa, mut pb) = (a.to_vec(), b.to_vec());
    for _ in 0..draws {
        for i in 0..a.len() {
            if r.random_bool(0.5) {
                pa[i] = b[i];
                pb[i] = a[i];
            } else {
                pa[i] = a[i];
                pb[i] = b[i];
            }
        }
        if (auroc_pairs(&pa, labels) - auroc_pairs(&pb, labels)).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    hits as f64 / draws as f64
}

/// Scores shifted up by `gap` for positives, plus standard normal noise.
pub fn scored_set(n: usize, prevalence: f64, gap: f64, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut r = rng(seed);
    let n_pos = (n as f64 * prevalence).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    labels.shuffle(&mut r);
    let scores = labels
        .iter()
        .map(|&l| {
            let z: f64 = StandardNormal.sample(&mut r);
            if l { gap + z } else { z }
        })
        .collect();
    (scores, labels)
}

/// Fractional ranks scaled to (0, 1].
pub fn rank_normalize(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut out = vec![0.0; x.len()];
    let mut k = 0;
    while k < order.len() {
        let mut m = k;
        while m + 1 < order.len() && x[order[m + 1]] == x[order[k]] {
            m += 1;
        }
        let r = (k + m) as f64 / 2.0 + 1.0;
        for &i in &order[k..=m] {
            out[i] = r / x.len() as f64;
        }
        k = m + 1;
    }
    out
}

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Mean log-loss plus the L1 penalty on `beta`.
pub fn lasso_objective(rows: &[Vec<f64>], y: &[bool], b0: f64, beta: &[f64], lambda: f64) -> f64 {
    let n = rows.len() as f64;
    let mut total = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let eta = b0 + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
        // log(1 + e^eta) - y*eta, computed stably
        let softplus = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        total += softplus - if yi { eta } else { 0.0 };
    }
    total / n + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Grid scan over (b0, b1, b2) at step 0.05, then pattern search refined
/// down to 1e-9 with explicit moves onto each kink.
pub fn brute_force_lasso_2d(rows: &[Vec<f64>], y: &[bool], lambda: f64) -> f64 {
    let f = |t: &[f64; 3]| lasso_objective(rows, y, t[0], &t[1..], lambda);
    let mut best = [0.0; 3];
    let mut best_val = f(&best);
    let steps: Vec<f64> = (-60..=60).map(|k| k as f64 * 0.05).collect();
    for &a in &steps {
        for &b in &steps {
            for &c in &steps {
                let v = f(&[a, b, c]);
                if v < best_val {
                    best_val = v;
                    best = [a, b, c];
                }
            }
        }
    }
    let mut h = 0.05;
    while h > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for k in 0..3 {
                let mut candidates = vec![best[k] - h, best[k] + h];
                if k > 0 {
                    candidates.push(0.0);
                }
                for c in candidates {
                    let mut t = best;
                    t[k] = c;
                    let v = f(&t);
                    if v < best_val - 1e-15 {
                        best_val = v;
                        best = t;
                        improved = true;
                    }
                }
            }
        }
        h *= 0.5;
    }
    best_val
}

/// Largest KKT violation of an L1 logistic fit, from dense rows.
pub fn lasso_kkt_residual(rows: &[Vec<f64>], y: &[bool], b0: f64, beta: &[f64], lambda: f64) -> f64 {
    let n = rows.len() as f64;
    let resid: Vec<f64> = rows
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let eta = b0 + row.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>();
            yi as u8 as f64 - sigmoid(eta)
        })
        .collect();
    let mut worst = (resid.iter().sum::<f64>() / n).abs();
    for (j, &b) in beta.iter().enumerate() {
        let g = rows.iter().zip(&resid).map(|(row, r)| row[j] * r).sum::<f64>() / n;
        let v = if b == 0.0 { (g.abs() - lambda).max(0.0) } else { (g - lambda * b.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}

/// Random sparse design with a logistic response.
pub fn logistic_problem(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut r = rng(seed);
    let truth: Vec<f64> = (0..p).map(|_| r.random_range(-2.0..2.0)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| if r.random_bool(0.7) { r.random_range(-1.5..1.5) } else { 0.0 }).collect();
        let eta: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        y.push(r.random_bool(sigmoid(eta)));
        rows.push(row);
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        y[0] = !y[0];
    }
    (rows, y)
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_phenorule")
}

/// Runs the binary with `args`, optionally pinning the thread count.
pub fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut c = Command::new(bin());
    c.args(args).env_remove("PHENORULE_THREADS").env("RUST_LOG", "error");
    if let Some(t) = threads {
        c.env("PHENORULE_THREADS", t.to_string());
    }
    c.output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Every file below `dir`, relative path and bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    fn walk(base: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(base, &path, out);
            } else {
                let rel = path.strip_prefix(base).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// Validates `instance` against the schema file under `schemas/`.
pub fn validate_schema(schema_file: &str, instance: &serde_json::Value) -> Result<(), String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(schema_file);
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let validator = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("\n"))
    }
}
