use std::io;

use thiserror::Error;

use crate::detect::GlassoFit;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e}")]
    Asymmetric { i: usize, j: usize, gap: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("constraints infeasible after {iterations} cycles (residual {residual:e})")]
    Infeasible { iterations: usize, residual: f64 },

    #[error("zero variance in column {index}")]
    ZeroVariance { index: usize },

    #[error("value {0} outside the open interval (-1, 1)")]
    DomainError(f64),

    #[error("degrees of freedom {0} < 1")]
    DegreesOfFreedom(i64),

    #[error("mixture model degenerate: {0}")]
    EmDegenerate(String),

    #[error("graphical lasso did not converge after {iterations} iterations")]
    NotConverged { iterations: usize, best: Box<GlassoFit> },

    #[error("AUC undefined: truth has {positives} edges and {negatives} non-edges")]
    UndefinedAuc { positives: usize, negatives: usize },

    #[error("only {found} feasible cells available, {required} required")]
    CohortInfeasible { found: usize, required: usize },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short stable name, used in the `status` column of result files.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Asymmetric { .. } => "Asymmetric",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::Infeasible { .. } => "Infeasible",
            Error::ZeroVariance { .. } => "ZeroVariance",
            Error::DomainError(_) => "DomainError",
            Error::DegreesOfFreedom(_) => "DegreesOfFreedom",
            Error::EmDegenerate(_) => "EMDegenerate",
            Error::NotConverged { .. } => "NotConverged",
            Error::UndefinedAuc { .. } => "UndefinedAUC",
            Error::CohortInfeasible { .. } => "CohortInfeasible",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::Config(_) => "ConfigError",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
