use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::AssocError;

const BOUNDARY_ETA: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Log link; y may be any non-negative real (quasi-Poisson mechanics).
    PoissonLog,
    BinomialLogit,
}

impl Family {
    fn inv_link(self, eta: f64) -> f64 {
        match self {
            Family::PoissonLog => eta.exp(),
            Family::BinomialLogit => crate::learn::lasso::sigmoid(eta),
        }
    }

    /// IRLS weight; equals the variance function under the canonical link.
    fn weight(self, mu: f64) -> f64 {
        match self {
            Family::PoissonLog => mu,
            Family::BinomialLogit => mu * (1.0 - mu),
        }
    }

    fn deviance(self, y: &[f64], mu: &[f64]) -> f64 {
        let xlogy = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
        2.0 * y
            .iter()
            .zip(mu)
            .map(|(&y, &m)| match self {
                Family::PoissonLog => xlogy(y, m) - (y - m),
                Family::BinomialLogit => xlogy(y, m) + xlogy(1.0 - y, 1.0 - m),
            })
            .sum::<f64>()
    }

    fn start(self, y: f64, ybar: f64) -> f64 {
        match self {
            Family::PoissonLog => ((y + ybar) / 2.0).max(0.1).ln(),
            Family::BinomialLogit => {
                let m = (y + 0.5) / 2.0;
                (m / (1.0 - m)).ln()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub family: Family,
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// Inverse Fisher information at the estimate, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub n_iterations: usize,
    pub converged: bool,
    pub deviance: f64,
    pub n: usize,
}

/// Exponentiated coefficient with a Wald interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub beta: f64,
    pub se: f64,
    pub p: f64,
}

impl GlmFit {
    pub fn se(&self, j: usize) -> f64 {
        self.covariance[j][j].max(0.0).sqrt()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `exp(beta_j)` with `exp(beta_j -/+ z * se_j)` at the given level, and
    /// the two-sided Wald p-value.
    pub fn effect(&self, j: usize, level: f64) -> Effect {
        let normal = Normal::standard();
        let z = normal.inverse_cdf(0.5 + level / 2.0);
        let (b, se) = (self.beta[j], self.se(j));
        Effect {
            estimate: b.exp(),
            lo: (b - z * se).exp(),
            hi: (b + z * se).exp(),
            beta: b,
            se,
            p: if se > 0.0 { 2.0 * normal.sf((b / se).abs()) } else { f64::NAN },
        }
    }
}

/// Maximum-likelihood fit by iteratively reweighted least squares. Stops
/// when the relative deviance change drops below `tol`.
pub fn fit_glm(
    x: &[Vec<f64>],
    y: &[f64],
    names: Vec<String>,
    family: Family,
    max_iter: usize,
    tol: f64,
) -> Result<GlmFit, AssocError> {
    let n = y.len();
    if x.len() != n || n == 0 {
        return Err(AssocError::EmptyCohort);
    }
    let p = names.len();
    if x.iter().any(|r| r.len() != p) {
        return Err(AssocError::DesignShape);
    }
    match family {
        Family::PoissonLog if y.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) => {
            return Err(AssocError::InvalidResponse("counts must be finite and non-negative".into()))
        }
        Family::BinomialLogit if y.iter().any(|&v| v != 0.0 && v != 1.0) => {
            return Err(AssocError::InvalidResponse("binary outcome must be 0 or 1".into()))
        }
        _ => {}
    }
    let xm = DMatrix::from_fn(n, p, |i, j| x[i][j]);
    if xm.rank(1e-10 * n as f64) < p {
        return Err(AssocError::RankDeficient);
    }
    let ybar = y.iter().sum::<f64>() / n as f64;
    let mut eta: DVector<f64> = DVector::from_iterator(n, y.iter().map(|&v| family.start(v, ybar)));
    let mut mu: Vec<f64> = eta.iter().map(|&e| family.inv_link(e)).collect();
    let mut dev = family.deviance(y, &mu);
    let mut beta = DVector::zeros(p);
    let mut converged = false;
    let mut iters = 0;
    for it in 1..=max_iter {
        iters = it;
        let w: Vec<f64> = mu.iter().map(|&m| family.weight(m).max(1e-300)).collect();
        let z: Vec<f64> = (0..n).map(|i| eta[i] + (y[i] - mu[i]) / w[i]).collect();
        let xw = DMatrix::from_fn(n, p, |i, j| xm[(i, j)] * w[i]);
        let info = xw.transpose() * &xm;
        let rhs = xw.transpose() * DVector::from_vec(z);
        let Some(chol) = info.cholesky() else {
            return Err(AssocError::RankDeficient);
        };
        beta = chol.solve(&rhs);
        eta = &xm * &beta;
        mu = eta.iter().map(|&e| family.inv_link(e)).collect();
        let new_dev = family.deviance(y, &mu);
        let rel = (new_dev - dev).abs() / (new_dev.abs() + 0.1);
        dev = new_dev;
        if rel < tol {
            converged = true;
            break;
        }
    }
    // fitted probabilities (or rates) pinned at the boundary mean some
    // coefficient is running off to infinity
    let boundary = |e: f64| match family {
        Family::PoissonLog => e < -BOUNDARY_ETA,
        Family::BinomialLogit => e.abs() > BOUNDARY_ETA,
    };
    if eta.iter().any(|&e| boundary(e)) || beta.iter().any(|b| !b.is_finite()) {
        return Err(AssocError::SeparationDetected);
    }
    if !converged {
        return Err(AssocError::DidNotConverge { iterations: iters });
    }
    // covariance at the final estimate
    let w: Vec<f64> = mu.iter().map(|&m| family.weight(m)).collect();
    let xw = DMatrix::from_fn(n, p, |i, j| xm[(i, j)] * w[i]);
    let info = xw.transpose() * &xm;
    let cov = info.try_inverse().ok_or(AssocError::RankDeficient)?;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GlmFit {
        family,
        names,
        beta: beta.iter().copied().collect(),
        covariance: (0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect(),
        n_iterations: iters,
        converged,
        deviance: dev,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|j| format!("b{j}")).collect()
    }

    fn score(x: &[Vec<f64>], y: &[f64], fit: &GlmFit) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..fit.beta.len() {
            let s: f64 = x
                .iter()
                .zip(y)
                .map(|(r, &yi)| {
                    let eta: f64 = r.iter().zip(&fit.beta).map(|(a, b)| a * b).sum();
                    r[j] * (yi - fit.family.inv_link(eta))
                })
                .sum();
            worst = worst.max(s.abs());
        }
        worst
    }

    #[test]
    fn two_group_poisson_is_ratio_of_means() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for v in [3.0, 17.0, 10.0, 10.0] {
            x.push(vec![1.0, 0.0]);
            y.push(v);
        }
        for v in [8.0, 6.0, 10.0] {
            x.push(vec![1.0, 1.0]);
            y.push(v);
        }
        let fit = fit_glm(&x, &y, names(2), Family::PoissonLog, 50, 1e-12).unwrap();
        assert!((fit.effect(1, 0.95).estimate - 0.8).abs() < 1e-8);
        assert!((fit.beta[0] - 10f64.ln()).abs() < 1e-8);
    }

    fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        // exposed: a events, b non-events; unexposed: c events, d non-events
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (exp, ev, k) in [(1.0, 1.0, a), (1.0, 0.0, b), (0.0, 1.0, c), (0.0, 0.0, d)] {
            for _ in 0..k {
                x.push(vec![1.0, exp]);
                y.push(ev);
            }
        }
        (x, y)
    }

    #[test]
    fn logistic_two_by_two_matches_closed_form() {
        let (x, y) = two_by_two(10, 90, 20, 80);
        let fit = fit_glm(&x, &y, names(2), Family::BinomialLogit, 50, 1e-12).unwrap();
        assert!((fit.beta[1] - (4.0f64 / 9.0).ln()).abs() < 1e-8);
        let se = (1.0 / 10.0 + 1.0 / 90.0 + 1.0 / 20.0 + 1.0 / 80.0f64).sqrt();
        assert!((fit.se(1) - se).abs() < 1e-8);
    }

    #[test]
    fn all_zero_binary_outcome_is_separation() {
        let (x, _) = two_by_two(5, 5, 5, 5);
        let y = vec![0.0; x.len()];
        assert_eq!(fit_glm(&x, &y, names(2), Family::BinomialLogit, 100, 1e-10), Err(AssocError::SeparationDetected));
    }

    #[test]
    fn collinear_design_is_rank_deficient() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64, 2.0 * i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        assert_eq!(fit_glm(&x, &y, names(3), Family::BinomialLogit, 50, 1e-10), Err(AssocError::RankDeficient));
    }

    #[test]
    fn score_equations_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> =
            (0..300).map(|_| vec![1.0, rng.random_bool(0.5) as u8 as f64, rng.random_range(20.0..90.0) / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| (0.5 + 0.3 * r[1] - 0.05 * r[2]).exp() * rng.random_range(0.5..1.5)).collect();
        let fit = fit_glm(&x, &y, names(3), Family::PoissonLog, 100, 1e-12).unwrap();
        assert!(score(&x, &y, &fit) < 1e-6);
        let c = 7.5;
        let yc: Vec<f64> = y.iter().map(|v| v * c).collect();
        let fit_c = fit_glm(&x, &yc, names(3), Family::PoissonLog, 100, 1e-12).unwrap();
        assert!((fit_c.beta[0] - fit.beta[0] - c.ln()).abs() < 1e-8);
        assert!((fit_c.beta[1] - fit.beta[1]).abs() < 1e-8);
        assert!((fit_c.beta[2] - fit.beta[2]).abs() < 1e-8);

        let yb: Vec<f64> = x.iter().map(|r| rng.random_bool(crate::learn::lasso::sigmoid(-1.0 + r[1] + 0.1 * r[2])) as u8 as f64).collect();
        let fit_b = fit_glm(&x, &yb, names(3), Family::BinomialLogit, 100, 1e-12).unwrap();
        assert!(score(&x, &yb, &fit_b) < 1e-6);
    }

    #[test]
    fn covariance_is_symmetric_psd_and_ci_symmetric_on_log_scale() {
        let (x, y) = two_by_two(13, 40, 22, 61);
        let fit = fit_glm(&x, &y, names(2), Family::BinomialLogit, 50, 1e-12).unwrap();
        let c = &fit.covariance;
        assert_eq!(c[0][1], c[1][0]);
        assert!(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] >= 0.0);
        let e = fit.effect(1, 0.95);
        let mid = e.estimate.ln();
        assert!(((e.hi.ln() - mid) - (mid - e.lo.ln())).abs() < 1e-9);
    }
}
