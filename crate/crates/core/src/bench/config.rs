use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detect::DetectionParams;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::gauss::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Bonferroni,
    BenjaminiYekutieli,
    FixedThreshold,
    FixedProportion,
    Mixture,
    Percolation,
    GlassoCv,
}

impl MethodKind {
    pub const ALL: [MethodKind; 7] = [
        MethodKind::Bonferroni,
        MethodKind::BenjaminiYekutieli,
        MethodKind::FixedThreshold,
        MethodKind::FixedProportion,
        MethodKind::Mixture,
        MethodKind::Percolation,
        MethodKind::GlassoCv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::Bonferroni => "bonferroni",
            MethodKind::BenjaminiYekutieli => "benjamini_yekutieli",
            MethodKind::FixedThreshold => "fixed_threshold",
            MethodKind::FixedProportion => "fixed_proportion",
            MethodKind::Mixture => "mixture",
            MethodKind::Percolation => "percolation",
            MethodKind::GlassoCv => "glasso_cv",
        }
    }

    pub fn is_test(self) -> bool {
        matches!(self, MethodKind::Bonferroni | MethodKind::BenjaminiYekutieli)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown method `{s}`")))
    }
}

/// A detection method with its parameters.
///
/// In JSON either a bare name (`"percolation"`) or an object with a
/// `method` key plus any [`DetectionParams`] fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "MethodEntry")]
pub struct MethodSpec {
    pub method: MethodKind,
    #[serde(flatten)]
    pub params: DetectionParams,
}

impl MethodSpec {
    pub fn new(method: MethodKind) -> Self {
        Self { method, params: DetectionParams::default() }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MethodEntry {
    Name(MethodKind),
    Full {
        method: MethodKind,
        #[serde(flatten)]
        params: DetectionParams,
    },
}

impl From<MethodEntry> for MethodSpec {
    fn from(e: MethodEntry) -> Self {
        match e {
            MethodEntry::Name(method) => MethodSpec::new(method),
            MethodEntry::Full { method, params } => MethodSpec { method, params },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub b: f64,
    pub d: f64,
}

/// `"auto"` or an explicit list of `(b, d)` cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CohortSpec {
    #[default]
    Auto,
    Cells(Vec<CellSpec>),
}

impl Serialize for CohortSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CohortSpec::Auto => s.serialize_str("auto"),
            CohortSpec::Cells(cells) => cells.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for CohortSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Cells(Vec<CellSpec>),
        }
        match Raw::deserialize(d)? {
            Raw::Name(s) if s == "auto" => Ok(CohortSpec::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("cohort must be \"auto\" or a list of cells, got `{s}`"))),
            Raw::Cells(c) => Ok(CohortSpec::Cells(c)),
        }
    }
}

/// Worker count: a number or `"auto"` (one per available core).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Threads {
    #[default]
    Auto,
    Count(usize),
}

impl Threads {
    /// Value for `rayon::ThreadPoolBuilder::num_threads` (0 = automatic).
    pub fn pool_size(self) -> usize {
        match self {
            Threads::Auto => 0,
            Threads::Count(n) => n,
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Threads::Auto => s.serialize_str("auto"),
            Threads::Count(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Threads {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Threads::Count(n)),
            Raw::Name(s) if s == "auto" => Ok(Threads::Auto),
            Raw::Name(s) => Err(serde::de::Error::custom(format!("threads must be a number or \"auto\", got `{s}`"))),
        }
    }
}

impl FromStr for Threads {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        s.parse().map(Threads::Count).map_err(|_| Error::Parse(format!("bad thread count `{s}`")))
    }
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL_INDICATORS.to_vec()
}

fn default_methods() -> Vec<MethodSpec> {
    MethodKind::ALL.into_iter().map(MethodSpec::new).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub p: usize,
    pub cohort: CohortSpec,
    pub cohort_size: usize,
    pub b_min: f64,
    /// Spacing of the `(b, d)` grid scanned in `auto` mode.
    pub grid_step: f64,
    #[serde(rename = "T_list")]
    pub t_list: Vec<usize>,
    pub replicates: usize,
    pub mode: Mode,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub threads: Threads,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 51,
            cohort: CohortSpec::Auto,
            cohort_size: 300,
            b_min: 0.2,
            grid_step: 0.025,
            t_list: vec![100, 500, 1000],
            replicates: 1,
            mode: Mode::Covariance,
            estimators: default_estimators(),
            methods: default_methods(),
            master_seed: 0,
            output_dir: PathBuf::from("results"),
            threads: Threads::Auto,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.p < 3 {
            return bad(format!("p = {} must be at least 3", self.p));
        }
        match &self.cohort {
            CohortSpec::Auto => {
                if self.cohort_size == 0 {
                    return bad("cohort_size must be positive".into());
                }
                if !(0.0..1.0).contains(&self.b_min) {
                    return bad(format!("b_min = {} outside [0, 1)", self.b_min));
                }
                if !(self.grid_step > 0.0 && self.grid_step <= 0.5) {
                    return bad(format!("grid_step = {} outside (0, 0.5]", self.grid_step));
                }
            }
            CohortSpec::Cells(cells) => {
                if cells.is_empty() {
                    return bad("explicit cohort is empty".into());
                }
                if let Some(c) = cells.iter().find(|c| !(c.b > 0.0 && c.b < 1.0 && c.d > 0.0 && c.d < 1.0)) {
                    return bad(format!("cell (b = {}, d = {}) outside (0, 1)²", c.b, c.d));
                }
            }
        }
        if self.t_list.is_empty() {
            return bad("T_list is empty".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.estimators.is_empty() || self.methods.is_empty() {
            return bad("estimators and methods must be non-empty".into());
        }
        if let Some(e) = self.estimators.iter().find(|e| !e.is_correlation_like()) {
            return bad(format!("estimator `{e}` is not a correlation-type indicator"));
        }
        if let Threads::Count(0) = self.threads {
            return bad("threads must be positive".into());
        }
        for m in &self.methods {
            m.params.validate().map_err(|e| Error::Config(format!("{}: {e}", m.method)))?;
        }
        for &t in &self.t_list {
            if t < 3 {
                return bad(format!("T = {t} is below 3"));
            }
            for m in &self.methods {
                if m.method == MethodKind::GlassoCv && t < 2 * m.params.cv_folds {
                    return bad(format!("T = {t} too small for {}-fold cross-validation", m.params.cv_folds));
                }
                let partial = self.estimators.iter().any(|e| e.is_partial());
                if m.method.is_test() && partial && t < self.p + 1 {
                    return bad(format!("T = {t} leaves no degrees of freedom for partial-correlation tests at p = {}", self.p));
                }
            }
        }
        Ok(())
    }
}
