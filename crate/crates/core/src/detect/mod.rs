//! Edge detection: turning continuous connectivity scores into a binary graph.
//!
//! Three families are provided: multiple testing on Pearson statistics
//! ([`bonferroni`], [`benjamini_yekutieli`]), thresholding
//! ([`fixed_threshold`], [`fixed_proportion`], [`mixture_threshold`],
//! [`percolation_threshold`]) and the sparse Gaussian graphical model
//! ([`graphical_lasso`], [`glasso_cv`]).

mod glasso;
mod mixture;
mod testing;
mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chordal::Adjacency;
use crate::error::{Error, Result};
use crate::symlin::SymMatrix;

pub use glasso::{glasso_cv, glasso_cv_path, graphical_lasso, graphical_lasso_warm, GlassoFit};
pub use mixture::{fit_two_gaussians, mixture_threshold, TwoGaussianFit};
pub use testing::{benjamini_hochberg, benjamini_yekutieli, bonferroni, pearson_pvalues, student_t_sf};
pub use threshold::{fixed_proportion, fixed_threshold, percolation_threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// `H₁: ρ > 0`.
    #[default]
    OneSidedPositive,
    TwoSided,
}

impl FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_sided_positive" => Ok(Sidedness::OneSidedPositive),
            "two_sided" => Ok(Sidedness::TwoSided),
            other => Err(Error::Parse(format!("unknown sidedness `{other}`"))),
        }
    }
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    pub alpha: f64,
    pub tau: f64,
    pub q: f64,
    pub sidedness: Sidedness,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub glasso_tol: f64,
    pub glasso_max_iter: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            tau: 0.3,
            q: 0.1,
            sidedness: Sidedness::OneSidedPositive,
            lambda_grid: log_grid(1e-3, 1.0, 20),
            cv_folds: 5,
            em_max_iter: 200,
            em_tol: 1e-8,
            glasso_tol: 1e-6,
            glasso_max_iter: 500,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::InvalidArgument(format!("tau = {} outside [0, 1]", self.tau)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidArgument(format!("q = {} outside [0, 1]", self.q)));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidArgument("lambda grid must be non-empty and positive".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidArgument("need at least 2 cross-validation folds".into()));
        }
        Ok(())
    }
}

/// Binary graph produced by a detection method.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub adjacency: Adjacency,
    pub method: String,
    pub chosen_threshold: Option<f64>,
    pub chosen_lambda: Option<f64>,
    pub alpha: Option<f64>,
    pub pvalues: Option<SymMatrix>,
}

impl DetectionOutcome {
    pub fn new(adjacency: Adjacency, method: impl Into<String>) -> Self {
        Self { adjacency, method: method.into(), chosen_threshold: None, chosen_lambda: None, alpha: None, pvalues: None }
    }

    pub fn metadata_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| x.to_string());
        format!(
            "# method={} threshold={} lambda={} alpha={}",
            self.method,
            opt(self.chosen_threshold),
            opt(self.chosen_lambda),
            opt(self.alpha)
        )
    }

    /// Edge list followed by the metadata line.
    pub fn to_text(&self) -> String {
        format!("{}{}\n", self.adjacency.to_edge_list(), self.metadata_line())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let adjacency = Adjacency::parse_edge_list(text)?;
        let meta = text
            .lines()
            .find(|l| l.starts_with("# method="))
            .ok_or_else(|| Error::Parse("missing metadata line".into()))?;
        let mut out = DetectionOutcome::new(adjacency, "");
        for field in meta.trim_start_matches('#').split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| Error::Parse(format!("bad field `{field}`")))?;
            let num = || -> Result<Option<f64>> {
                if v == "-" {
                    Ok(None)
                } else {
                    v.parse().map(Some).map_err(|_| Error::Parse(format!("bad number `{v}`")))
                }
            };
            match k {
                "method" => out.method = v.to_string(),
                "threshold" => out.chosen_threshold = num()?,
                "lambda" => out.chosen_lambda = num()?,
                "alpha" => out.alpha = num()?,
                _ => {}
            }
        }
        Ok(out)
    }
}

impl fmt::Display for DetectionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lambda_grid() {
        let g = DetectionParams::default().lambda_grid;
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[19] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn outcome_text_round_trip() {
        let mut o = DetectionOutcome::new(Adjacency::from_edges(3, &[(0, 2)]).unwrap(), "percolation");
        o.chosen_threshold = Some(0.25);
        let text = o.to_text();
        assert_eq!(text, "p 3\n0 2\n# method=percolation threshold=0.25 lambda=- alpha=-\n");
        assert_eq!(DetectionOutcome::parse_text(&text).unwrap(), o);
    }

    #[test]
    fn params_validation() {
        assert!(DetectionParams::default().validate().is_ok());
        let bad = DetectionParams { alpha: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = DetectionParams { lambda_grid: vec![], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
