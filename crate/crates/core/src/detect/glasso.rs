//! Graphical lasso by block coordinate descent over columns of the
//! covariance estimate `W`, each column solved as a lasso problem by cyclic
//! coordinate descent. The diagonal is left unpenalized, so `W_ii = S_ii`.

use super::{DetectionOutcome, DetectionParams};
use crate::chordal::Adjacency;
use crate::error::{Error, Result};
use crate::estimators::empirical_cov;
use crate::gauss::{derive_seed, Rng, SampleSet};
use crate::symlin::{cholesky, SymMatrix};

use nalgebra::{DMatrix, DVector};

/// Entries of Θ at or below this magnitude are treated as zero.
pub const EDGE_TOL: f64 = 1e-8;

const MAX_LASSO_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit {
    pub precision: SymMatrix,
    pub covariance: SymMatrix,
    /// Column `j` holds the lasso coefficients of variable `j` (row-major `p × p`).
    coefficients: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: DetectionOutcome,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Cap on active-set changes per column before falling back to descent.
const FEATURE_SIGN_STEPS: usize = 200;

/// Column-`j` lasso `min ½βᵀWβ − sᵀβ + λ|β|₁` over `k ≠ j` by feature-sign
/// search: repeatedly solve on the current sign pattern, line-search over the
/// zero crossings, grow the active set by the worst KKT violator. Exact and
/// finite when `W` is positive definite, and unlike cyclic descent it does
/// not slow down when `W` is nearly singular. `β` is updated only on success.
fn feature_sign_column(w: &[f64], s: &SymMatrix, j: usize, lambda: f64, beta: &mut [f64], wb: &mut [f64]) -> bool {
    let p = s.p();
    let idx: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let q = idx.len();
    let wq = DMatrix::from_fn(q, q, |a, c| w[idx[a] * p + idx[c]]);
    let sq = DVector::from_fn(q, |a, _| s.get(idx[a], j));
    let mut x = DVector::from_fn(q, |a, _| beta[idx[a] * p + j]);
    let scale = sq.amax().max(wq.amax()).max(f64::MIN_POSITIVE);
    let opt_tol = 1e-11 * scale;
    let objective = |v: &DVector<f64>| 0.5 * v.dot(&(&wq * v)) - sq.dot(v) + lambda * v.lp_norm(1);

    let mut done = false;
    for _ in 0..FEATURE_SIGN_STEPS {
        let grad = &wq * &x - &sq;
        let mut sign: Vec<f64> = x.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
        let active_ok = (0..q).all(|a| sign[a] == 0.0 || (grad[a] + lambda * sign[a]).abs() <= opt_tol);
        if active_ok {
            let worst = (0..q).filter(|&a| sign[a] == 0.0).max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()));
            match worst {
                Some(a) if grad[a].abs() > lambda + opt_tol => sign[a] = -grad[a].signum(),
                _ => {
                    done = true;
                    break;
                }
            }
        }
        let active: Vec<usize> = (0..q).filter(|&a| sign[a] != 0.0).collect();
        let n = active.len();
        let m = DMatrix::from_fn(n, n, |a, c| wq[(active[a], active[c])]);
        let rhs = DVector::from_fn(n, |a, _| sq[active[a]] - lambda * sign[active[a]]);
        let Some(chol) = m.cholesky() else { return false };
        let sol = chol.solve(&rhs);
        let mut target = DVector::zeros(q);
        for (a, &k) in active.iter().enumerate() {
            target[k] = sol[a];
        }
        // candidates: the full step and every point where a coefficient hits zero
        let mut best = target.clone();
        let mut best_obj = objective(&target);
        for &k in &active {
            let (from, to) = (x[k], target[k]);
            if from != 0.0 && from * to < 0.0 {
                let t = from / (from - to);
                let mut cand = &x + (&target - &x) * t;
                cand[k] = 0.0;
                let obj = objective(&cand);
                if obj < best_obj {
                    best_obj = obj;
                    best = cand;
                }
            }
        }
        if best == x {
            break;
        }
        x = best;
    }
    if !done {
        return false;
    }
    for (a, &k) in idx.iter().enumerate() {
        beta[k * p + j] = x[a];
    }
    let fitted = &wq * &x;
    for (a, &k) in idx.iter().enumerate() {
        wb[k] = fitted[a];
    }
    wb[j] = 0.0;
    true
}

pub fn graphical_lasso(s: &SymMatrix, lambda: f64, tol: f64, max_iter: usize) -> Result<GlassoFit> {
    graphical_lasso_warm(s, lambda, tol, max_iter, None)
}

/// As [`graphical_lasso`], optionally starting from a previous fit.
pub fn graphical_lasso_warm(s: &SymMatrix, lambda: f64, tol: f64, max_iter: usize, warm: Option<&GlassoFit>) -> Result<GlassoFit> {
    let p = s.p();
    if let Some(i) = (0..p).find(|&i| !(s.get(i, i) > 0.0)) {
        return Err(Error::NotPositiveDefinite { index: i, pivot: s.get(i, i) });
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be non-negative")));
    }

    let (mut w, mut beta) = match warm {
        Some(f) if f.covariance.p() == p => {
            let mut w = f.covariance.as_slice().to_vec();
            for i in 0..p {
                w[i * p + i] = s.get(i, i);
            }
            (w, f.coefficients.clone())
        }
        _ => (s.as_slice().to_vec(), vec![0.0; p * p]),
    };

    let off_count = (p * p - p).max(1) as f64;
    let mean_abs_off = s.upper_entries().map(|(_, _, v)| v.abs()).sum::<f64>() * 2.0 / off_count;
    let threshold = if mean_abs_off > 0.0 { tol * mean_abs_off } else { tol };
    let inner_tol = 0.1 * threshold;

    let mut converged = false;
    let mut iterations = 0;
    // w·β for the current column, indexed by the full variable index
    let mut wb = vec![0.0; p];
    while iterations < max_iter {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            let solved = feature_sign_column(&w, s, j, lambda, &mut beta, &mut wb);
            if !solved {
                for k in 0..p {
                    wb[k] = if k == j {
                        0.0
                    } else {
                        (0..p).filter(|&l| l != j).map(|l| w[k * p + l] * beta[l * p + j]).sum()
                    };
                }
            }
            for _ in 0..if solved { 0 } else { MAX_LASSO_SWEEPS } {
                let mut sweep_delta: f64 = 0.0;
                for k in (0..p).filter(|&k| k != j) {
                    let wkk = w[k * p + k];
                    let old = beta[k * p + j];
                    let partial = s.get(k, j) - (wb[k] - wkk * old);
                    let new = soft_threshold(partial, lambda) / wkk;
                    let delta = new - old;
                    if delta != 0.0 {
                        beta[k * p + j] = new;
                        for l in (0..p).filter(|&l| l != j) {
                            wb[l] += delta * w[l * p + k];
                        }
                        sweep_delta = sweep_delta.max(delta.abs());
                    }
                }
                if sweep_delta < inner_tol {
                    break;
                }
            }
            for k in (0..p).filter(|&k| k != j) {
                max_delta = max_delta.max((w[k * p + j] - wb[k]).abs());
                w[k * p + j] = wb[k];
                w[j * p + k] = wb[k];
            }
        }
        if max_delta < threshold {
            converged = true;
            break;
        }
    }

    let covariance = SymMatrix::symmetrized(p, w);
    let mut theta = vec![0.0; p * p];
    for j in 0..p {
        let dot: f64 = (0..p).filter(|&k| k != j).map(|k| covariance.get(k, j) * beta[k * p + j]).sum();
        let tjj = 1.0 / (covariance.get(j, j) - dot);
        theta[j * p + j] = tjj;
        for k in (0..p).filter(|&k| k != j) {
            theta[k * p + j] = -beta[k * p + j] * tjj;
        }
    }
    let precision = SymMatrix::symmetrized(p, theta);

    let mut g = Adjacency::empty(p);
    for (i, j, v) in precision.upper_entries() {
        if v.abs() > EDGE_TOL {
            g.add_edge(i, j);
        }
    }
    let mut outcome = DetectionOutcome::new(g, "glasso");
    outcome.chosen_lambda = Some(lambda);

    let fit = GlassoFit { precision, covariance, coefficients: beta, lambda, iterations, converged, outcome };
    if converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged { iterations, best: Box::new(fit) })
    }
}

/// Fit regardless of the convergence flag.
fn fit_anyway(r: Result<GlassoFit>) -> Result<GlassoFit> {
    match r {
        Err(Error::NotConverged { best, .. }) => Ok(*best),
        other => other,
    }
}

/// Held-out Gaussian log-likelihood `log det Θ − trace(S·Θ)`.
fn heldout_score(theta: &SymMatrix, s_test: &SymMatrix) -> f64 {
    match cholesky(theta) {
        Ok(chol) => {
            let tr: f64 = s_test.as_slice().iter().zip(theta.as_slice()).map(|(a, b)| a * b).sum();
            chol.log_det() - tr
        }
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Per-λ cross-validation scores (summed over folds), in `lambda_grid` order.
pub fn glasso_cv_path(x: &SampleSet, params: &DetectionParams) -> Result<Vec<f64>> {
    params.validate()?;
    let t = x.t();
    let k = params.cv_folds;
    if t < 2 * k {
        return Err(Error::InvalidArgument(format!("T = {t} too small for {k} folds")));
    }
    let mut rows: Vec<usize> = (0..t).collect();
    Rng::new(derive_seed(x.seed, "cv-split")).shuffle(&mut rows);

    // descending λ so each fit warm-starts from a sparser one
    let mut order: Vec<usize> = (0..params.lambda_grid.len()).collect();
    order.sort_by(|&a, &b| params.lambda_grid[b].total_cmp(&params.lambda_grid[a]));

    let mut scores = vec![0.0; params.lambda_grid.len()];
    for fold in 0..k {
        let (lo, hi) = (fold * t / k, (fold + 1) * t / k);
        let test: Vec<usize> = rows[lo..hi].to_vec();
        let train: Vec<usize> = rows[..lo].iter().chain(&rows[hi..]).copied().collect();
        let s_train = empirical_cov(&x.select_rows(&train)?);
        let s_test = empirical_cov(&x.select_rows(&test)?);
        let mut prev: Option<GlassoFit> = None;
        for &li in &order {
            let lambda = params.lambda_grid[li];
            let fit = fit_anyway(graphical_lasso_warm(&s_train, lambda, params.glasso_tol, params.glasso_max_iter, prev.as_ref()))?;
            scores[li] += heldout_score(&fit.precision, &s_test);
            prev = Some(fit);
        }
    }
    Ok(scores)
}

/// Graphical lasso with λ chosen by K-fold cross-validated likelihood
/// (ties go to the larger λ), refitted on all rows.
pub fn glasso_cv(x: &SampleSet, params: &DetectionParams) -> Result<GlassoFit> {
    let scores = glasso_cv_path(x, params)?;
    let mut best = 0;
    for (i, &sc) in scores.iter().enumerate() {
        let (lb, li) = (params.lambda_grid[best], params.lambda_grid[i]);
        if sc > scores[best] || (sc == scores[best] && li > lb) {
            best = i;
        }
    }
    let lambda = params.lambda_grid[best];
    let mut fit = graphical_lasso(&empirical_cov(x), lambda, params.glasso_tol, params.glasso_max_iter)?;
    fit.outcome.method = "glasso_cv".into();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::{sample_mvn, Mode};
    use crate::symlin::inverse_spd;

    #[test]
    fn two_by_two_soft_threshold() {
        for (s12, lambda) in [(0.5, 0.2), (-0.5, 0.2), (0.3, 0.3), (0.1, 0.4), (0.7, 0.0)] {
            let s = SymMatrix::from_rows(&[vec![1.0, s12], vec![s12, 1.0]]).unwrap();
            let fit = graphical_lasso(&s, lambda, 1e-10, 500).unwrap();
            let want = s12.signum() * (s12.abs() - lambda).max(0.0);
            assert!((fit.covariance.get(0, 1) - want).abs() < 1e-10, "{s12} {lambda}");
            assert_eq!(fit.precision.get(0, 1).abs() <= EDGE_TOL, s12.abs() <= lambda);
        }
    }

    #[test]
    fn unpenalized_is_inverse() {
        let s = SymMatrix::from_rows(&[vec![2.0, 0.5, 0.3], vec![0.5, 1.5, -0.2], vec![0.3, -0.2, 1.0]]).unwrap();
        let fit = graphical_lasso(&s, 0.0, 1e-8, 1000).unwrap();
        assert!(fit.precision.max_abs_diff(&inverse_spd(&s).unwrap()) < 1e-5);
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let s = SymMatrix::from_rows(&[vec![1.0, 0.4, 0.1], vec![0.4, 1.0, -0.3], vec![0.1, -0.3, 1.0]]).unwrap();
        let fit = graphical_lasso(&s, 0.4, 1e-6, 500).unwrap();
        assert_eq!(fit.outcome.adjacency.n_edges(), 0);
        assert!((fit.precision.get(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_diagonal() {
        let s = SymMatrix::diagonal(&[1.0, 0.0]);
        assert!(matches!(graphical_lasso(&s, 0.1, 1e-6, 10), Err(Error::NotPositiveDefinite { index: 1, .. })));
    }

    #[test]
    fn single_lambda_cv_equals_direct_fit() {
        let x = sample_mvn(&SymMatrix::identity(6), 60, 21, Mode::Covariance).unwrap();
        let params = DetectionParams { lambda_grid: vec![0.05], ..Default::default() };
        let cv = glasso_cv(&x, &params).unwrap();
        let direct = graphical_lasso(&empirical_cov(&x), 0.05, params.glasso_tol, params.glasso_max_iter).unwrap();
        assert_eq!(cv.precision, direct.precision);
        assert_eq!(cv.outcome.chosen_lambda, Some(0.05));
    }

    #[test]
    fn cv_needs_enough_rows() {
        let x = sample_mvn(&SymMatrix::identity(3), 8, 1, Mode::Covariance).unwrap();
        assert!(glasso_cv(&x, &DetectionParams::default()).is_err());
    }
}
