use statrs::function::beta::beta_reg;

use super::{DetectionOutcome, Sidedness};
use crate::chordal::{pair_count, Adjacency};
use crate::error::{Error, Result};
use crate::symlin::SymMatrix;

/// Survival function `P(T > t)` of Student's t with `nu` degrees of freedom.
pub fn student_t_sf(t: f64, nu: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let x = nu / (nu + t * t);
    let tail = 0.5 * beta_reg(nu / 2.0, 0.5, x);
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// P-values of `H₀: ρ_ij = 0` from the t statistic `r·√(ν / (1 − r²))`,
/// `ν = T − 2 − dof_adjust`. The diagonal is set to 1.
pub fn pearson_pvalues(r: &SymMatrix, t: usize, dof_adjust: usize, sidedness: Sidedness) -> Result<SymMatrix> {
    let nu = t as i64 - 2 - dof_adjust as i64;
    if nu < 1 {
        return Err(Error::DegreesOfFreedom(nu));
    }
    let nu = nu as f64;
    let p = r.p();
    Ok(SymMatrix::from_upper_fn(p, |i, j| {
        if i == j {
            return 1.0;
        }
        let rho = r.get(i, j);
        let stat = if rho >= 1.0 {
            f64::INFINITY
        } else if rho <= -1.0 {
            f64::NEG_INFINITY
        } else {
            rho * (nu / (1.0 - rho * rho)).sqrt()
        };
        match sidedness {
            Sidedness::OneSidedPositive => student_t_sf(stat, nu),
            Sidedness::TwoSided => (2.0 * student_t_sf(stat.abs(), nu)).min(1.0),
        }
    }))
}

fn upper_pvalues(pvals: &SymMatrix) -> Vec<(usize, usize, f64)> {
    pvals.upper_entries().collect()
}

/// Keeps `(i, j)` iff `p_ij ≤ α / m` with `m = p(p−1)/2`.
pub fn bonferroni(pvals: &SymMatrix, alpha: f64) -> DetectionOutcome {
    let p = pvals.p();
    let cutoff = alpha / pair_count(p).max(1) as f64;
    let mut g = Adjacency::empty(p);
    for (i, j, v) in upper_pvalues(pvals) {
        if v <= cutoff {
            g.add_edge(i, j);
        }
    }
    let mut out = DetectionOutcome::new(g, "bonferroni");
    out.alpha = Some(alpha);
    out.pvalues = Some(pvals.clone());
    out
}

/// Step-up rule `p_(k) ≤ k·α / (m·c)`; keeps every pair with `p ≤ p_(k*)`.
fn step_up(pvals: &SymMatrix, alpha: f64, c: f64) -> Adjacency {
    let p = pvals.p();
    let entries = upper_pvalues(pvals);
    let m = entries.len();
    let mut sorted: Vec<f64> = entries.iter().map(|e| e.2).collect();
    sorted.sort_by(f64::total_cmp);
    let mut g = Adjacency::empty(p);
    let cut = (1..=m).rev().find(|&k| sorted[k - 1] <= k as f64 * alpha / (m as f64 * c));
    if let Some(k) = cut {
        let pk = sorted[k - 1];
        for (i, j, v) in entries {
            if v <= pk {
                g.add_edge(i, j);
            }
        }
    }
    g
}

/// Benjamini-Yekutieli FDR control (valid under arbitrary dependence).
pub fn benjamini_yekutieli(pvals: &SymMatrix, alpha: f64) -> DetectionOutcome {
    let m = pair_count(pvals.p());
    let harmonic: f64 = (1..=m).map(|i| 1.0 / i as f64).sum();
    let mut out = DetectionOutcome::new(step_up(pvals, alpha, harmonic.max(1.0)), "benjamini_yekutieli");
    out.alpha = Some(alpha);
    out.pvalues = Some(pvals.clone());
    out
}

/// Benjamini-Hochberg. Not offered as a benchmark method: it assumes
/// independent or positively dependent tests.
pub fn benjamini_hochberg(pvals: &SymMatrix, alpha: f64) -> DetectionOutcome {
    let mut out = DetectionOutcome::new(step_up(pvals, alpha, 1.0), "benjamini_hochberg");
    out.alpha = Some(alpha);
    out
}
