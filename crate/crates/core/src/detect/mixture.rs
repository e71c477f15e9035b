use super::{DetectionOutcome, DetectionParams};
use crate::chordal::Adjacency;
use crate::error::{Error, Result};
use crate::estimators::{fisher_z, ConnectivityMatrix};

const MIN_WEIGHT: f64 = 1e-6;
const MIN_VARIANCE: f64 = 1e-10;

/// Two-component univariate Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoGaussianFit {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl TwoGaussianFit {
    /// Index of the component whose mean is nearer zero.
    pub fn null_component(&self) -> usize {
        if self.means[0].abs() <= self.means[1].abs() {
            0
        } else {
            1
        }
    }

    fn log_densities(&self, x: f64) -> [f64; 2] {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        [0, 1].map(|k| {
            let d = x - self.means[k];
            self.weights[k].ln() - 0.5 * (ln2pi + self.variances[k].ln() + d * d / self.variances[k])
        })
    }

    /// Posterior probability of component `k` at `x`.
    pub fn posterior(&self, x: f64, k: usize) -> f64 {
        let l = self.log_densities(x);
        let m = l[0].max(l[1]);
        let e = [(l[0] - m).exp(), (l[1] - m).exp()];
        e[k] / (e[0] + e[1])
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// EM fit started from the 25th/75th percentile split.
///
/// The input is sorted first so the fit depends only on the multiset of values.
pub fn fit_two_gaussians(values: &[f64], max_iter: usize, tol: f64) -> Result<TwoGaussianFit> {
    if values.len() < 2 {
        return Err(Error::EmDegenerate("fewer than two observations".into()));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var < MIN_VARIANCE {
        return Err(Error::EmDegenerate(format!("sample variance {var:e}")));
    }
    let mut fit = TwoGaussianFit {
        weights: [0.5, 0.5],
        means: [quantile_sorted(&x, 0.25), quantile_sorted(&x, 0.75)],
        variances: [var, var],
        iterations: 0,
        log_likelihood: f64::NEG_INFINITY,
    };
    let mut resp = vec![0.0; x.len()];
    for iter in 1..=max_iter {
        // E-step
        let mut ll = 0.0;
        for (r, &xi) in resp.iter_mut().zip(&x) {
            let l = fit.log_densities(xi);
            let m = l[0].max(l[1]);
            let s = (l[0] - m).exp() + (l[1] - m).exp();
            ll += m + s.ln();
            *r = (l[1] - m).exp() / s;
        }
        // M-step
        let n1: f64 = resp.iter().sum();
        let n0 = n - n1;
        let w = [n0 / n, n1 / n];
        if w[0] < MIN_WEIGHT || w[1] < MIN_WEIGHT {
            return Err(Error::EmDegenerate(format!("component weight {:e}", w[0].min(w[1]))));
        }
        let mu1 = resp.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() / n1;
        let mu0 = resp.iter().zip(&x).map(|(r, v)| (1.0 - r) * v).sum::<f64>() / n0;
        let var1 = resp.iter().zip(&x).map(|(r, v)| r * (v - mu1) * (v - mu1)).sum::<f64>() / n1;
        let var0 = resp.iter().zip(&x).map(|(r, v)| (1.0 - r) * (v - mu0) * (v - mu0)).sum::<f64>() / n0;
        if var0 < MIN_VARIANCE || var1 < MIN_VARIANCE {
            return Err(Error::EmDegenerate(format!("component variance {:e}", var0.min(var1))));
        }
        let prev = fit.log_likelihood;
        fit = TwoGaussianFit { weights: w, means: [mu0, mu1], variances: [var0, var1], iterations: iter, log_likelihood: ll };
        if (ll - prev).abs() <= tol * ll.abs().max(1.0) {
            break;
        }
    }
    Ok(fit)
}

/// Mixture-model threshold on Fisher-z transformed scores.
///
/// An edge is kept when its posterior probability under the non-null
/// component exceeds one half.
pub fn mixture_threshold(c: &ConnectivityMatrix, params: &DetectionParams) -> Result<DetectionOutcome> {
    let entries: Vec<(usize, usize, f64)> = c.values.upper_entries().collect();
    let z: Vec<f64> = entries.iter().map(|e| fisher_z(e.2)).collect::<Result<_>>()?;
    let fit = fit_two_gaussians(&z, params.em_max_iter, params.em_tol)?;
    let signal = 1 - fit.null_component();
    let mut g = Adjacency::empty(c.p());
    let mut smallest: Option<f64> = None;
    for (&(i, j, v), &zi) in entries.iter().zip(&z) {
        if fit.posterior(zi, signal) > 0.5 {
            g.add_edge(i, j);
            smallest = Some(smallest.map_or(v.abs(), |s: f64| s.min(v.abs())));
        }
    }
    let mut out = DetectionOutcome::new(g, "mixture");
    out.chosen_threshold = smallest;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimatorKind;
    use crate::gauss::Rng;
    use crate::symlin::SymMatrix;

    #[test]
    fn separates_two_populations() {
        // p = 64 gives 2016 pairs; the first 1008 are drawn from the high component
        let p = 64;
        let mut rng = Rng::new(12);
        let mut k = 0;
        let mut truth = Adjacency::empty(p);
        let m = SymMatrix::from_upper_fn(p, |i, j| {
            if i == j {
                return 1.0;
            }
            k += 1;
            if k <= 1008 {
                truth.add_edge(i, j);
                0.6 + 0.05 * rng.standard_normal()
            } else {
                0.05 * rng.standard_normal()
            }
        });
        let out = mixture_threshold(&ConnectivityMatrix::new(m, EstimatorKind::EmpiricalCorr), &DetectionParams::default()).unwrap();
        let c = crate::metrics::confusion(&out.adjacency, &truth).unwrap();
        assert!(c.fp + c.fn_ <= 20, "{c:?}");
        assert!(out.chosen_threshold.unwrap() > 0.3);
    }

    #[test]
    fn identical_scores_are_degenerate() {
        let m = SymMatrix::from_upper_fn(6, |i, j| if i == j { 1.0 } else { 0.4 });
        let err = mixture_threshold(&ConnectivityMatrix::new(m, EstimatorKind::EmpiricalCorr), &DetectionParams::default());
        assert!(matches!(err, Err(Error::EmDegenerate(_))));
    }

    #[test]
    fn fit_ignores_input_order() {
        let mut rng = Rng::new(5);
        let mut v: Vec<f64> = (0..300).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 } + 0.2 * rng.standard_normal()).collect();
        let a = fit_two_gaussians(&v, 200, 1e-8).unwrap();
        rng.shuffle(&mut v);
        let b = fit_two_gaussians(&v, 200, 1e-8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_unit_scores() {
        let m = SymMatrix::from_upper_fn(3, |_, _| 1.0);
        let err = mixture_threshold(&ConnectivityMatrix::new(m, EstimatorKind::EmpiricalCorr), &DetectionParams::default());
        assert!(matches!(err, Err(Error::DomainError(_))));
    }
}
