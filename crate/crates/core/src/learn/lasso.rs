use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_columns, check_inputs, LassoParams, LearnError};
use crate::eval::{assign_folds, auroc};
use crate::features::FeatureMatrix;
use crate::matrix::CscMatrix;

/// Penalized logistic fit at one λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub columns: Vec<String>,
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub n_iterations: usize,
    pub converged: bool,
    /// Penalized objective after each accepted outer iteration, starting
    /// from the initial point.
    pub objective_trace: Vec<f64>,
}

impl LassoFit {
    pub fn n_nonzero(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

const MIN_WEIGHT: f64 = 1e-5;

pub(crate) struct Data {
    x: CscMatrix,
    y: Vec<f64>,
    n: usize,
}

impl Data {
    pub(crate) fn new(x: &FeatureMatrix, y: &[bool]) -> Self {
        Data { x: x.matrix.to_csc(), y: y.iter().map(|&b| b as u8 as f64).collect(), n: y.len() }
    }

    fn p(&self) -> usize {
        self.x.n_cols()
    }

    fn linear_predictor(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                let (rows, vals) = self.x.col(j);
                for (&i, &v) in rows.iter().zip(vals) {
                    eta[i] += v * b;
                }
            }
        }
        eta
    }

    /// Mean log-loss at linear predictor `eta`.
    fn loss(&self, eta: &[f64]) -> f64 {
        eta.iter().zip(&self.y).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / self.n as f64
    }

    fn objective(&self, eta: &[f64], beta: &[f64], lambda: f64) -> f64 {
        self.loss(eta) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// Negative gradient of the mean log-loss with respect to each column,
    /// `(1/n) X^T (y - p)`.
    pub(crate) fn neg_gradient(&self, eta: &[f64]) -> Vec<f64> {
        let resid: Vec<f64> = eta.iter().zip(&self.y).map(|(&e, &y)| y - sigmoid(e)).collect();
        let inv_n = 1.0 / self.n as f64;
        (0..self.p())
            .map(|j| {
                let (rows, vals) = self.x.col(j);
                rows.iter().zip(vals).map(|(&i, &v)| v * resid[i]).sum::<f64>() * inv_n
            })
            .collect()
    }

    fn null_intercept(&self) -> f64 {
        logit(self.y.iter().sum::<f64>() / self.n as f64)
    }
}

struct Solution {
    b0: f64,
    beta: Vec<f64>,
    n_iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    loss: f64,
}

/// One cyclic pass over `cols` plus the intercept. Returns the largest move
/// in gradient units, `xwx_j * |delta_j|`, so the stopping rule does not
/// depend on column scale.
#[allow(clippy::too_many_arguments)]
fn cd_pass(
    d: &Data,
    cols: &[usize],
    w: &[f64],
    w_sum: f64,
    xwx: &[f64],
    r: &mut [f64],
    b0: &mut f64,
    beta: &mut [f64],
    lambda: f64,
) -> f64 {
    let inv_n = 1.0 / d.n as f64;
    let mut dmax: f64 = 0.0;
    for &j in cols {
        let (rows, vals) = d.x.col(j);
        let old = beta[j];
        let new = if xwx[j] > 0.0 {
            let g: f64 = rows.iter().zip(vals).map(|(&i, &v)| w[i] * v * r[i]).sum::<f64>() * inv_n;
            soft_threshold(g + xwx[j] * old, lambda) / xwx[j]
        } else {
            0.0
        };
        let delta = new - old;
        if delta != 0.0 {
            beta[j] = new;
            for (&i, &v) in rows.iter().zip(vals) {
                r[i] -= delta * v;
            }
            dmax = dmax.max(xwx[j] * delta.abs());
        }
    }
    let delta0 = w.iter().zip(r.iter()).map(|(&w, &r)| w * r).sum::<f64>() / w_sum;
    if delta0 != 0.0 {
        *b0 += delta0;
        r.iter_mut().for_each(|ri| *ri -= delta0);
        dmax = dmax.max(w_sum * inv_n * delta0.abs());
    }
    dmax
}

const MAX_SWEEPS: usize = 10_000;

/// Weighted least-squares coordinate descent on the active columns: full
/// passes alternate with passes over the current nonzeros only. `r` holds
/// the working residual and is kept in sync with the coefficients.
#[allow(clippy::too_many_arguments)]
fn cd_inner(
    d: &Data,
    active: &[usize],
    w: &[f64],
    xwx: &[f64],
    r: &mut [f64],
    b0: &mut f64,
    beta: &mut [f64],
    lambda: f64,
    tol: f64,
) {
    let w_sum: f64 = w.iter().sum();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        if cd_pass(d, active, w, w_sum, xwx, r, b0, beta, lambda) < tol {
            return;
        }
        let nonzero: Vec<usize> = active.iter().copied().filter(|&j| beta[j] != 0.0).collect();
        subspace_solve(d, &nonzero, w, r, b0, beta, lambda);
        while sweeps < MAX_SWEEPS {
            sweeps += 1;
            if cd_pass(d, &nonzero, w, w_sum, xwx, r, b0, beta, lambda) < tol {
                break;
            }
        }
    }
}

/// Minimizes the quadratic model over the intercept and the columns in
/// `support` with each sign held fixed, by exact Newton steps on the support.
/// A step is cut short where a coefficient would cross zero; that coefficient
/// is dropped and the step repeated on what remains. Up to each cut the model
/// equals the penalized quadratic, which therefore never increases.
fn subspace_solve(d: &Data, support: &[usize], w: &[f64], r: &mut [f64], b0: &mut f64, beta: &mut [f64], lambda: f64) {
    let k = support.len() + 1;
    if support.is_empty() || k > d.n {
        return;
    }
    let inv_n = 1.0 / d.n as f64;
    let mut a = DMatrix::<f64>::zeros(d.n, k);
    a.column_mut(0).fill(1.0);
    for (c, &j) in support.iter().enumerate() {
        let (rows, vals) = d.x.col(j);
        for (&i, &v) in rows.iter().zip(vals) {
            a[(i, c + 1)] = v;
        }
    }
    let mut aw = a.clone();
    for (i, mut row) in aw.row_iter_mut().enumerate() {
        row *= w[i];
    }
    let h = aw.transpose() * &a * inv_n;
    // gradient of the smooth part, kept current as the coefficients move
    let mut g = aw.transpose() * DVector::from_column_slice(r) * inv_n;
    let mut total = DVector::<f64>::zeros(k);
    let mut keep: Vec<usize> = (0..k).collect();
    let coef = |c: usize, beta: &[f64]| beta[support[c - 1]];
    while keep.len() > 1 {
        let m = keep.len();
        let sub = DMatrix::from_fn(m, m, |p, q| h[(keep[p], keep[q])]);
        let rhs = DVector::from_fn(m, |p, _| {
            let c = keep[p];
            if c == 0 { g[0] } else { g[c] - lambda * coef(c, beta).signum() }
        });
        // A ridge keeps collinear supports solvable and still yields descent,
        // since the ridged matrix dominates the true curvature.
        let chol = match sub.clone().cholesky() {
            Some(c) => c,
            None => {
                let mu = 1e-8 * sub.trace() / m as f64 + 1e-12;
                match (sub + DMatrix::<f64>::identity(m, m) * mu).cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };
        let delta = chol.solve(&rhs);
        if delta.iter().any(|v| !v.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut hit = None;
        for p in 1..m {
            let b = coef(keep[p], beta);
            if (b + delta[p]) * b <= 0.0 {
                let tp = -b / delta[p];
                if tp < t {
                    t = tp;
                    hit = Some(p);
                }
            }
        }
        for p in 0..m {
            let c = keep[p];
            let step = delta[p] * t;
            total[c] += step;
            for q in 0..k {
                g[q] -= h[(q, c)] * step;
            }
            if c == 0 {
                *b0 += step;
            } else {
                let j = support[c - 1];
                beta[j] = if hit == Some(p) { 0.0 } else { beta[j] + step };
            }
        }
        match hit {
            Some(p) => {
                keep.remove(p);
            }
            None => break,
        }
    }
    let moved = &a * &total;
    for (ri, m) in r.iter_mut().zip(moved.iter()) {
        *ri -= m;
    }
}

/// Largest KKT violation over `active` and the intercept at `eta`.
fn kkt_violation(d: &Data, active: &[usize], eta: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let resid: Vec<f64> = eta.iter().zip(&d.y).map(|(&e, &y)| y - sigmoid(e)).collect();
    let inv_n = 1.0 / d.n as f64;
    let mut worst = (resid.iter().sum::<f64>() * inv_n).abs();
    for &j in active {
        let (rows, vals) = d.x.col(j);
        let g = rows.iter().zip(vals).map(|(&i, &v)| v * resid[i]).sum::<f64>() * inv_n;
        let v = if beta[j] != 0.0 { (g - lambda * beta[j].signum()).abs() } else { (g.abs() - lambda).max(0.0) };
        worst = worst.max(v);
    }
    worst
}

/// Reweighting loop restricted to `active`, with step halving so the
/// penalized objective never increases. Converged once the largest
/// coefficient move, in gradient units, is below the tolerance.
fn irls(
    d: &Data,
    active: &[usize],
    lambda: f64,
    params: &LassoParams,
    s: &mut Solution,
    max_iter: usize,
) -> bool {
    let mut eta = d.linear_predictor(s.b0, &s.beta);
    let mut obj = d.objective(&eta, &s.beta, lambda);
    if s.trace.is_empty() {
        s.trace.push(obj);
    }
    let inv_n = 1.0 / d.n as f64;
    for _ in 0..max_iter {
        s.n_iterations += 1;
        let prob: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = prob.iter().map(|&p| (p * (1.0 - p)).max(MIN_WEIGHT)).collect();
        let mut r: Vec<f64> = prob.iter().zip(&d.y).zip(&w).map(|((&p, &y), &w)| (y - p) / w).collect();
        let mut xwx = vec![0.0; d.p()];
        for &j in active {
            let (rows, vals) = d.x.col(j);
            xwx[j] = rows.iter().zip(vals).map(|(&i, &v)| w[i] * v * v).sum::<f64>() * inv_n;
        }
        // inexact inner solves far from the optimum, tight ones near it
        let floor = params.tolerance * 0.1;
        let inner_tol = floor.max(0.1 * kkt_violation(d, active, &eta, &s.beta, lambda));
        let mut b0 = s.b0;
        let mut beta = s.beta.clone();
        cd_inner(d, active, &w, &xwx, &mut r, &mut b0, &mut beta, lambda, inner_tol);

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cb0 = s.b0 + t * (b0 - s.b0);
            let cbeta: Vec<f64> = s.beta.iter().zip(&beta).map(|(&o, &n)| o + t * (n - o)).collect();
            let ceta = d.linear_predictor(cb0, &cbeta);
            let cobj = d.objective(&ceta, &cbeta, lambda);
            if cobj <= obj {
                accepted = Some((cb0, cbeta, ceta, cobj));
                break;
            }
            t *= 0.5;
        }
        let Some((cb0, cbeta, ceta, cobj)) = accepted else {
            // no descent available from here: numerically optimal
            return true;
        };
        let w_mean = w.iter().sum::<f64>() * inv_n;
        let change = active
            .iter()
            .map(|&j| xwx[j] * (s.beta[j] - cbeta[j]).abs())
            .fold(w_mean * (s.b0 - cb0).abs(), f64::max);
        s.b0 = cb0;
        s.beta = cbeta;
        eta = ceta;
        obj = cobj;
        s.trace.push(obj);
        if change < params.tolerance && inner_tol <= floor {
            s.loss = d.loss(&eta);
            return true;
        }
    }
    s.loss = d.loss(&eta);
    false
}

/// Fit at one λ from a warm start. Columns enter the working set by a
/// screening rule and stay there; a final gradient check over all columns
/// re-admits any violator.
fn solve(d: &Data, lambda: f64, prev_lambda: Option<f64>, warm: (f64, Vec<f64>), params: &LassoParams) -> Solution {
    let (b0, beta) = warm;
    let eta = d.linear_predictor(b0, &beta);
    let g = d.neg_gradient(&eta);
    let screen = match prev_lambda {
        Some(lp) => 2.0 * lambda - lp,
        None => lambda,
    };
    let mut in_set: Vec<bool> = beta.iter().zip(&g).map(|(&b, &gj)| b != 0.0 || gj.abs() >= screen).collect();
    let mut s = Solution { b0, beta, n_iterations: 0, converged: false, trace: Vec::new(), loss: d.loss(&eta) };
    loop {
        let active: Vec<usize> = (0..d.p()).filter(|&j| in_set[j]).collect();
        let remaining = params.max_iter.saturating_sub(s.n_iterations).max(1);
        let ok = irls(d, &active, lambda, params, &mut s, remaining);
        let eta = d.linear_predictor(s.b0, &s.beta);
        let g = d.neg_gradient(&eta);
        let mut added = false;
        for j in 0..d.p() {
            if !in_set[j] && g[j].abs() > lambda + params.tolerance {
                in_set[j] = true;
                added = true;
            }
        }
        if !added || s.n_iterations >= params.max_iter {
            s.converged = ok && !added;
            return s;
        }
    }
}

fn into_fit(x: &FeatureMatrix, lambda: f64, s: Solution) -> LassoFit {
    if !s.converged {
        log::warn!("lasso fit at lambda={lambda:e} stopped after {} iterations without converging", s.n_iterations);
    }
    LassoFit {
        columns: x.columns.clone(),
        intercept: s.b0,
        beta: s.beta,
        lambda,
        n_iterations: s.n_iterations,
        converged: s.converged,
        objective_trace: s.trace,
    }
}

/// Minimize `(1/n) sum logloss + lambda * ||beta||_1`, intercept unpenalized.
///
/// A fit that exhausts `max_iter` is returned with `converged = false`.
pub fn fit_lasso_logistic(
    x: &FeatureMatrix,
    y: &[bool],
    lambda: f64,
    params: &LassoParams,
) -> Result<LassoFit, LearnError> {
    check_inputs(x, y)?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(LearnError::InvalidParam(format!("lambda={lambda}")));
    }
    let d = Data::new(x, y);
    let warm = (d.null_intercept(), vec![0.0; d.p()]);
    Ok(into_fit(x, lambda, solve(&d, lambda, None, warm, params)))
}

/// Solve along `lambdas` (descending) with warm starts. When
/// `stop_at_saturation` is set, the path stops once 99.9% of the null
/// deviance is explained and later λ reuse that fit.
fn path(d: &Data, lambdas: &[f64], params: &LassoParams, stop_at_saturation: bool) -> Vec<(f64, Vec<f64>, bool)> {
    let b_null = d.null_intercept();
    let null_loss = d.loss(&vec![b_null; d.n]);
    let mut warm = (b_null, vec![0.0; d.p()]);
    let mut prev = None;
    let mut out: Vec<(f64, Vec<f64>, bool)> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        if stop_at_saturation {
            if let Some(last) = out.last() {
                let last_loss = d.loss(&d.linear_predictor(last.0, &last.1));
                if 1.0 - last_loss / null_loss >= 0.999 {
                    out.push(last.clone());
                    continue;
                }
            }
        }
        let s = solve(d, lambda, prev, warm, params);
        warm = (s.b0, s.beta.clone());
        prev = Some(lambda);
        out.push((s.b0, s.beta, s.converged));
    }
    out
}

/// Smallest λ at which every coefficient is zero: `max_j |(1/n) x_j^T (y - mean(y))|`.
pub fn lambda_max(x: &FeatureMatrix, y: &[bool]) -> f64 {
    let d = Data::new(x, y);
    let eta = vec![d.null_intercept(); d.n];
    d.neg_gradient(&eta).iter().fold(0.0, |m, g| m.max(g.abs()))
}

/// `n` log-spaced values from `lambda_max` down to `lambda_max * min_ratio`.
pub fn lambda_grid(lambda_max: f64, n: usize, min_ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    (0..n).map(|i| lambda_max * min_ratio.powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSelection {
    /// Grid in the order searched (descending).
    pub lambdas: Vec<f64>,
    pub mean_auroc: Vec<f64>,
    pub selected: usize,
    pub lambda: f64,
}

/// Choose λ by inner stratified CV on mean held-out AUROC (ties go to the
/// larger λ), then refit on all rows at the chosen λ.
pub fn lasso_path_select(
    x: &FeatureMatrix,
    y: &[bool],
    grid: Option<&[f64]>,
    inner_folds: usize,
    seed: u64,
    params: &LassoParams,
) -> Result<(LambdaSelection, LassoFit), LearnError> {
    check_inputs(x, y)?;
    if inner_folds < 2 {
        return Err(LearnError::InvalidParam("inner_folds must be at least 2".into()));
    }
    let mut lambdas: Vec<f64> = match grid {
        Some(g) => g.to_vec(),
        None => lambda_grid(lambda_max(x, y), params.n_lambda, params.lambda_min_ratio),
    };
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(LearnError::InvalidParam("lambda grid must be non-empty, finite and non-negative".into()));
    }
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas.dedup();

    let folds = assign_folds(y, inner_folds, seed, true)
        .map_err(|e| LearnError::InvalidParam(format!("inner folds: {e}")))?;
    // out-of-fold scores per fold per λ
    let per_fold: Vec<(Vec<usize>, Vec<Vec<f64>>)> = (0..inner_folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..y.len()).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..y.len()).filter(|&i| folds[i] == f).collect();
            let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
            if ytr.iter().all(|&v| v) || ytr.iter().all(|&v| !v) {
                return (test, Vec::new());
            }
            let d = Data::new(&x.select_rows(&train), &ytr);
            let xte = x.matrix.select_rows(&test);
            let scores = path(&d, &lambdas, params, true)
                .into_iter()
                .map(|(b0, beta, _)| (0..test.len()).map(|i| b0 + xte.row_dot(i, &beta)).collect())
                .collect();
            (test, scores)
        })
        .collect();

    let mut mean_auroc = vec![0.0; lambdas.len()];
    for (l, m) in mean_auroc.iter_mut().enumerate() {
        let per: Vec<f64> = per_fold
            .iter()
            .filter(|(_, s)| !s.is_empty())
            .filter_map(|(test, s)| {
                let yt: Vec<bool> = test.iter().map(|&i| y[i]).collect();
                auroc(&s[l], &yt).ok()
            })
            .collect();
        *m = if per.is_empty() { f64::NAN } else { per.iter().sum::<f64>() / per.len() as f64 };
    }
    if mean_auroc.iter().all(|m| m.is_nan()) {
        // folds too small for per-fold AUROC: score the pooled held-out predictions
        for (l, m) in mean_auroc.iter_mut().enumerate() {
            let (mut s, mut yy) = (Vec::new(), Vec::new());
            for (test, sc) in per_fold.iter().filter(|(_, s)| !s.is_empty()) {
                s.extend_from_slice(&sc[l]);
                yy.extend(test.iter().map(|&i| y[i]));
            }
            *m = auroc(&s, &yy).unwrap_or(0.5);
        }
    }
    let mut selected = 0;
    for l in 1..lambdas.len() {
        if mean_auroc[l] > mean_auroc[selected] + 1e-12 || mean_auroc[selected].is_nan() {
            selected = l;
        }
    }

    let d = Data::new(x, y);
    let lambda = lambdas[selected];
    let mut warm = (d.null_intercept(), vec![0.0; d.p()]);
    let mut prev = None;
    for &l in &lambdas[..selected] {
        let s = solve(&d, l, prev, warm, params);
        warm = (s.b0, s.beta);
        prev = Some(l);
    }
    let fit = into_fit(x, lambda, solve(&d, lambda, prev, warm, params));
    Ok((LambdaSelection { lambdas, mean_auroc, selected, lambda }, fit))
}

/// Largest probability strictly below 1.
const P_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

/// `sigmoid(intercept + x . beta)`, kept inside the open unit interval.
pub fn predict_proba_lasso(fit: &LassoFit, x: &FeatureMatrix) -> Result<Vec<f64>, LearnError> {
    check_columns(&fit.columns, x)?;
    Ok((0..x.n_rows())
        .map(|i| sigmoid(fit.intercept + x.matrix.row_dot(i, &fit.beta)).clamp(f64::MIN_POSITIVE, P_MAX))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopCoefficients {
    pub positive: Vec<(String, f64)>,
    pub negative: Vec<(String, f64)>,
}

/// The `k` largest positive and `k` most negative nonzero coefficients,
/// ties ordered by column name.
pub fn top_coefficients(fit: &LassoFit, k: usize) -> TopCoefficients {
    let mut pos: Vec<(String, f64)> = Vec::new();
    let mut neg: Vec<(String, f64)> = Vec::new();
    for (name, &b) in fit.columns.iter().zip(&fit.beta) {
        if b > 0.0 {
            pos.push((name.clone(), b));
        } else if b < 0.0 {
            neg.push((name.clone(), b));
        }
    }
    pos.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    neg.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    pos.truncate(k);
    neg.truncate(k);
    TopCoefficients { positive: pos, negative: neg }
}
