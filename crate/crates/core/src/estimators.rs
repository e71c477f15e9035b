//! Connectivity measures estimated from samples.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::SampleSet;
use crate::matrix_text;
use crate::symlin::{inverse_spd, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    EmpiricalCorr,
    EmpiricalPcorr,
    LwCorr,
    LwPcorr,
    EmpiricalCov,
}

impl EstimatorKind {
    pub const ALL_INDICATORS: [EstimatorKind; 4] =
        [EstimatorKind::EmpiricalCorr, EstimatorKind::EmpiricalPcorr, EstimatorKind::LwCorr, EstimatorKind::LwPcorr];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::EmpiricalCorr => "empirical_corr",
            EstimatorKind::EmpiricalPcorr => "empirical_pcorr",
            EstimatorKind::LwCorr => "lw_corr",
            EstimatorKind::LwPcorr => "lw_pcorr",
            EstimatorKind::EmpiricalCov => "empirical_cov",
        }
    }

    /// Partial correlations condition on the other `p - 2` variables.
    pub fn is_partial(self) -> bool {
        matches!(self, EstimatorKind::EmpiricalPcorr | EstimatorKind::LwPcorr)
    }

    pub fn is_correlation_like(self) -> bool {
        !matches!(self, EstimatorKind::EmpiricalCov)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "empirical_corr" => EstimatorKind::EmpiricalCorr,
            "empirical_pcorr" => EstimatorKind::EmpiricalPcorr,
            "lw_corr" => EstimatorKind::LwCorr,
            "lw_pcorr" => EstimatorKind::LwPcorr,
            "empirical_cov" => EstimatorKind::EmpiricalCov,
            other => return Err(Error::Parse(format!("unknown estimator `{other}`"))),
        })
    }
}

/// Edge scores `c_ij` produced by one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityMatrix {
    pub values: SymMatrix,
    pub kind: EstimatorKind,
}

impl ConnectivityMatrix {
    pub fn new(values: SymMatrix, kind: EstimatorKind) -> Self {
        Self { values, kind }
    }

    pub fn p(&self) -> usize {
        self.values.p()
    }

    pub fn to_text(&self) -> String {
        matrix_text::write_matrix(&[("kind", self.kind.to_string())], &self.values)
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let (fields, values) = matrix_text::parse_matrix(text)?;
        let kind = matrix_text::field(&fields, "kind")
            .ok_or_else(|| Error::Parse("missing `kind` in header".into()))?
            .parse()?;
        Ok(Self { values, kind })
    }
}

/// `Σ̂ = XᵀX / T` (no centering: the model is centered).
pub fn empirical_cov(x: &SampleSet) -> SymMatrix {
    let (t, p) = (x.t(), x.p());
    let mut acc = vec![0.0; p * p];
    for r in 0..t {
        let row = x.row(r);
        for i in 0..p {
            let xi = row[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..p {
                acc[i * p + j] += xi * row[j];
            }
        }
    }
    let inv_t = 1.0 / t as f64;
    SymMatrix::from_upper_fn(p, |i, j| acc[i * p + j] * inv_t)
}

/// `diag(S)^{-1/2} · S · diag(S)^{-1/2}`.
pub fn cov_to_corr(s: &SymMatrix) -> Result<SymMatrix> {
    let p = s.p();
    let mut scale = Vec::with_capacity(p);
    for i in 0..p {
        let v = s.get(i, i);
        if !(v > 1e-300) {
            return Err(Error::ZeroVariance { index: i });
        }
        scale.push(1.0 / v.sqrt());
    }
    Ok(SymMatrix::from_upper_fn(p, |i, j| {
        if i == j {
            1.0
        } else {
            (s.get(i, j) * scale[i] * scale[j]).clamp(-1.0, 1.0)
        }
    }))
}

/// Normalised negated inverse: `-Ω_ij / √(Ω_ii Ω_jj)` with `Ω = corr(s)⁻¹`.
pub fn partial_corr(s: &SymMatrix) -> Result<SymMatrix> {
    let omega = inverse_spd(&cov_to_corr(s)?)?;
    Ok(precision_to_partial_corr(&omega))
}

pub fn precision_to_partial_corr(omega: &SymMatrix) -> SymMatrix {
    let p = omega.p();
    let scale: Vec<f64> = (0..p).map(|i| 1.0 / omega.get(i, i).sqrt()).collect();
    SymMatrix::from_upper_fn(p, |i, j| {
        if i == j {
            1.0
        } else {
            (-omega.get(i, j) * scale[i] * scale[j]).clamp(-1.0, 1.0)
        }
    })
}

/// Ledoit-Wolf shrinkage toward `μ·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LedoitWolf {
    pub covariance: SymMatrix,
    /// Shrinkage intensity in `[0, 1]`.
    pub shrinkage: f64,
    /// `trace(Σ̂) / p`.
    pub mu: f64,
}

pub fn ledoit_wolf(x: &SampleSet) -> LedoitWolf {
    let s = empirical_cov(x);
    let (t, p) = (x.t() as f64, x.p());
    let mu = s.trace() / p as f64;

    // ‖Σ̂ − μI‖²_F
    let mut dist2 = 0.0;
    let mut s_norm2 = 0.0;
    for i in 0..p {
        for j in 0..p {
            let v = s.get(i, j);
            s_norm2 += v * v;
            let d = if i == j { v - mu } else { v };
            dist2 += d * d;
        }
    }
    // (1/T²) Σ_k ‖x_k x_kᵀ − Σ̂‖²_F = (Σ_k ‖x_k‖⁴ / T − ‖Σ̂‖²_F) / T
    let fourth: f64 = (0..x.t())
        .map(|r| {
            let n2: f64 = x.row(r).iter().map(|v| v * v).sum();
            n2 * n2
        })
        .sum();
    let fluct = ((fourth / t - s_norm2) / t).max(0.0);
    let shrinkage = if dist2 > 0.0 { (fluct / dist2).clamp(0.0, 1.0) } else { 0.0 };

    let covariance = SymMatrix::from_upper_fn(p, |i, j| {
        let target = if i == j { mu } else { 0.0 };
        (1.0 - shrinkage) * s.get(i, j) + shrinkage * target
    });
    LedoitWolf { covariance, shrinkage, mu }
}

/// `atanh(r)`.
pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::DomainError(r));
    }
    Ok(r.signum() * r.abs().atanh())
}

/// Computes the requested connectivity measure from samples.
pub fn estimate(x: &SampleSet, kind: EstimatorKind) -> Result<ConnectivityMatrix> {
    let values = match kind {
        EstimatorKind::EmpiricalCov => empirical_cov(x),
        EstimatorKind::EmpiricalCorr => cov_to_corr(&empirical_cov(x))?,
        EstimatorKind::EmpiricalPcorr => partial_corr(&empirical_cov(x))?,
        EstimatorKind::LwCorr => cov_to_corr(&ledoit_wolf(x).covariance)?,
        EstimatorKind::LwPcorr => partial_corr(&ledoit_wolf(x).covariance)?,
    };
    Ok(ConnectivityMatrix { values, kind })
}
