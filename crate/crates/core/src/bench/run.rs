use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::json;

use super::cohort::{build_cohort, CohortMember};
use super::config::{ExperimentConfig, MethodKind, MethodSpec};
use crate::detect::{
    benjamini_yekutieli, bonferroni, fixed_proportion, fixed_threshold, glasso_cv, mixture_threshold, pearson_pvalues,
    percolation_threshold, DetectionOutcome,
};
use crate::error::{Error, Result};
use crate::estimators::{empirical_cov, estimate, ConnectivityMatrix, EstimatorKind};
use crate::gauss::{derive_seed, sample_mvn_labelled, Mode, SampleSet};
use crate::metrics::{auc, confusion, Confusion};

pub const RECORD_HEADER: &str =
    "matrix_id,b,d,T,replicate,mode,estimator,method,param,tp,tn,fp,fn,accuracy,tpr,fpr,auc,chosen_threshold,runtime_ms,status";

pub const SWEEP_HEADER: &str = "matrix_id,b,d,T,tau,accuracy";

/// One benchmark result row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub matrix_id: usize,
    pub b: f64,
    pub d: f64,
    pub t: usize,
    pub replicate: usize,
    pub mode: Mode,
    pub estimator: String,
    pub method: String,
    pub param: Option<f64>,
    /// `None` when the method failed.
    pub confusion: Option<Confusion>,
    pub auc: Option<f64>,
    pub chosen_threshold: Option<f64>,
    pub runtime_ms: f64,
    /// `ok`, or the error name of a failed method.
    pub status: String,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn accuracy(&self) -> Option<f64> {
        self.confusion.map(|c| c.accuracy())
    }

    pub fn tpr(&self) -> Option<f64> {
        self.confusion.map(|c| c.tpr())
    }

    pub fn fpr(&self) -> Option<f64> {
        self.confusion.map(|c| c.fpr())
    }

    pub fn csv_line(&self) -> String {
        let counts = match self.confusion {
            Some(c) => format!("{},{},{},{},{},{},{}", c.tp, c.tn, c.fp, c.fn_, c.accuracy(), c.tpr(), c.fpr()),
            None => ",,,,,,".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{}",
            self.matrix_id,
            self.b,
            self.d,
            self.t,
            self.replicate,
            self.mode,
            self.estimator,
            self.method,
            opt(self.param),
            counts,
            opt(self.auc),
            opt(self.chosen_threshold),
            self.runtime_ms,
            self.status
        )
    }
}

pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::with_capacity(128 * (records.len() + 1));
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Parses a results file written by [`records_csv`].
pub fn parse_records(text: &str) -> Result<Vec<RunRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RECORD_HEADER => {}
        Some(h) => return Err(Error::SchemaMismatch(format!("unexpected header `{h}`"))),
        None => return Err(Error::SchemaMismatch("empty file".into())),
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Parse(format!("bad number `{s}`"))) };
    let int = |s: &str| -> Result<usize> { s.parse().map_err(|_| Error::Parse(format!("bad integer `{s}`"))) };
    let maybe = |s: &str| -> Result<Option<f64>> { if s.is_empty() { Ok(None) } else { num(s).map(Some) } };
    let mut out = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 20 {
            return Err(Error::Parse(format!("row {}: {} fields", n + 2, f.len())));
        }
        let confusion =
            if f[9].is_empty() { None } else { Some(Confusion { tp: int(f[9])?, tn: int(f[10])?, fp: int(f[11])?, fn_: int(f[12])? }) };
        out.push(RunRecord {
            matrix_id: int(f[0])?,
            b: num(f[1])?,
            d: num(f[2])?,
            t: int(f[3])?,
            replicate: int(f[4])?,
            mode: f[5].parse()?,
            estimator: f[6].to_string(),
            method: f[7].to_string(),
            param: maybe(f[8])?,
            confusion,
            auc: maybe(f[16])?,
            chosen_threshold: maybe(f[17])?,
            runtime_ms: num(f[18])?,
            status: f[19].to_string(),
        });
    }
    Ok(out)
}

/// Everything one benchmark run produces.
#[derive(Debug, Clone)]
pub struct BenchOutput {
    pub cohort: Vec<CohortMember>,
    pub records: Vec<RunRecord>,
}

impl BenchOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}

/// Runs `f` on a pool sized by the config.
pub fn with_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.pool_size())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Label of the sample stream for one work item.
pub fn sample_seed(master_seed: u64, matrix_id: usize, t: usize, replicate: usize) -> u64 {
    derive_seed(master_seed, &format!("sample/{matrix_id}/{t}/{replicate}"))
}

fn draw(cfg: &ExperimentConfig, m: &CohortMember, t: usize, replicate: usize) -> Result<SampleSet> {
    let seed = sample_seed(cfg.master_seed, m.id, t, replicate);
    sample_mvn_labelled(&m.matrix, t, seed, cfg.mode, &format!("matrix{}", m.id))
}

/// Columns rescaled to unit mean square, so the sample covariance is the
/// correlation matrix.
pub fn standardize(x: &SampleSet) -> Result<SampleSet> {
    let s = empirical_cov(x);
    let scale: Vec<f64> = s.diag();
    if let Some(i) = scale.iter().position(|&v| !(v > 1e-300)) {
        return Err(Error::ZeroVariance { index: i });
    }
    Ok(x.scale_columns(&scale.iter().map(|v| v.sqrt()).collect::<Vec<_>>()))
}

fn detect_on(c: &ConnectivityMatrix, spec: &MethodSpec, t: usize) -> Result<DetectionOutcome> {
    let params = &spec.params;
    let dof_adjust = if c.kind.is_partial() { c.p() - 2 } else { 0 };
    match spec.method {
        MethodKind::Bonferroni => Ok(bonferroni(&pearson_pvalues(&c.values, t, dof_adjust, params.sidedness)?, params.alpha)),
        MethodKind::BenjaminiYekutieli => {
            Ok(benjamini_yekutieli(&pearson_pvalues(&c.values, t, dof_adjust, params.sidedness)?, params.alpha))
        }
        MethodKind::FixedThreshold => Ok(fixed_threshold(c, params.tau)),
        MethodKind::FixedProportion => Ok(fixed_proportion(c, params.q)),
        MethodKind::Mixture => mixture_threshold(c, params),
        MethodKind::Percolation => Ok(percolation_threshold(c)),
        MethodKind::GlassoCv => Err(Error::InvalidArgument("glasso_cv runs on samples".into())),
    }
}

fn method_param(spec: &MethodSpec) -> Option<f64> {
    match spec.method {
        MethodKind::Bonferroni | MethodKind::BenjaminiYekutieli => Some(spec.params.alpha),
        MethodKind::FixedThreshold => Some(spec.params.tau),
        MethodKind::FixedProportion => Some(spec.params.q),
        MethodKind::Mixture | MethodKind::Percolation | MethodKind::GlassoCv => None,
    }
}

struct Item<'a> {
    cfg: &'a ExperimentConfig,
    member: &'a CohortMember,
    t: usize,
    replicate: usize,
}

impl Item<'_> {
    fn record(&self, estimator: &str, spec: &MethodSpec) -> RunRecord {
        RunRecord {
            matrix_id: self.member.id,
            b: self.member.b,
            d: self.member.d,
            t: self.t,
            replicate: self.replicate,
            mode: self.cfg.mode,
            estimator: estimator.to_string(),
            method: spec.method.to_string(),
            param: method_param(spec),
            confusion: None,
            auc: None,
            chosen_threshold: None,
            runtime_ms: 0.0,
            status: "ok".into(),
        }
    }

    fn fill(&self, rec: &mut RunRecord, outcome: Result<DetectionOutcome, &'static str>, started: Instant) {
        rec.runtime_ms = started.elapsed().as_secs_f64() * 1e3;
        let scored = outcome.and_then(|o| Ok((confusion(&o.adjacency, &self.member.support).map_err(|e| e.name())?, o)));
        match scored {
            Ok((c, o)) => {
                rec.confusion = Some(c);
                rec.chosen_threshold = o.chosen_threshold;
                if rec.param.is_none() {
                    rec.param = o.chosen_lambda;
                }
            }
            Err(name) => rec.status = name.to_string(),
        }
    }

    fn run(&self) -> Vec<RunRecord> {
        let cfg = self.cfg;
        let mut out = Vec::new();
        // failures are carried by error name, shared by every row they affect
        let x = draw(cfg, self.member, self.t, self.replicate).map_err(|e| e.name());
        let (graph_methods, sample_methods): (Vec<&MethodSpec>, Vec<&MethodSpec>) =
            cfg.methods.iter().partition(|m| m.method != MethodKind::GlassoCv);

        for &kind in &cfg.estimators {
            let c = x.as_ref().map_err(|e| *e).and_then(|x| estimate(x, kind).map_err(|e| e.name()));
            let score = c.as_ref().ok().and_then(|c| auc(&c.values, &self.member.support).ok());
            for spec in &graph_methods {
                let mut rec = self.record(kind.as_str(), spec);
                rec.auc = score;
                let started = Instant::now();
                let outcome = c.as_ref().map_err(|e| *e).and_then(|c| detect_on(c, spec, self.t).map_err(|e| e.name()));
                self.fill(&mut rec, outcome, started);
                out.push(rec);
            }
        }
        for spec in sample_methods {
            let mut rec = self.record(EstimatorKind::EmpiricalCorr.as_str(), spec);
            let started = Instant::now();
            let fit = x.as_ref().map_err(|e| *e).and_then(|x| standardize(x).and_then(|xs| glasso_cv(&xs, &spec.params)).map_err(|e| e.name()));
            rec.auc = fit.as_ref().ok().and_then(|f| auc(&f.precision, &self.member.support).ok());
            self.fill(&mut rec, fit.map(|f| f.outcome), started);
            out.push(rec);
        }
        out
    }
}

/// Runs every `(matrix, T, replicate)` work item over an existing cohort on
/// the current pool. Records come back in `(matrix_id, T, replicate)` order.
pub fn run_items(cfg: &ExperimentConfig, cohort: &[CohortMember]) -> Vec<RunRecord> {
    let items: Vec<Item> = cohort
        .iter()
        .flat_map(|member| {
            cfg.t_list.iter().flat_map(move |&t| (0..cfg.replicates).map(move |replicate| Item { cfg, member, t, replicate }))
        })
        .collect();
    items.par_iter().map(Item::run).collect::<Vec<_>>().into_iter().flatten().collect()
}

/// Builds the cohort and runs the full sweep on a pool of `cfg.threads`.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    with_pool(cfg, || {
        let cohort = build_cohort(cfg)?;
        let records = run_items(cfg, &cohort);
        Ok(BenchOutput { cohort, records })
    })?
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn manifest(cfg: &ExperimentConfig, out: &BenchOutput) -> serde_json::Value {
    let cohort: Vec<serde_json::Value> = out
        .cohort
        .iter()
        .map(|m| {
            json!({
                "matrix_id": m.id, "b_nominal": m.b_nominal, "b": m.b, "d_nominal": m.d_nominal, "d": m.d,
                "n_edges": m.support.n_edges(), "seed": m.seed, "iterations": m.iterations,
            })
        })
        .collect();
    let mut pairings: Vec<serde_json::Value> = Vec::new();
    for m in &cfg.methods {
        if m.method == MethodKind::GlassoCv {
            pairings.push(json!({"method": m.method, "estimator": "empirical_corr", "input": "standardized samples"}));
        } else {
            for e in &cfg.estimators {
                pairings.push(json!({"method": m.method, "estimator": e}));
            }
        }
    }
    json!({
        "config_sha256": cfg.hash(),
        "config": cfg,
        "master_seed": cfg.master_seed,
        "cohort_seed": derive_seed(cfg.master_seed, "cohort"),
        "sample_seed_label": "sample/{matrix_id}/{T}/{replicate}",
        "cohort": cohort,
        "pairings": pairings,
        "records": out.records.len(),
        "failures": out.failures(),
    })
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &BenchOutput) -> Result<()> {
    write_atomic(&dir.join("results.csv"), records_csv(&out.records).as_bytes())?;
    let manifest = serde_json::to_string_pretty(&manifest(cfg, out)).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), manifest.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub matrix_id: usize,
    pub b: f64,
    pub d: f64,
    pub t: usize,
    pub tau: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
}

/// Accuracy of `fixed_threshold` on the empirical correlation of replicate 0
/// at every `tau`, for each `(matrix, T)`.
pub fn threshold_sweep_on(cfg: &ExperimentConfig, cohort: &[CohortMember], grid: &[f64]) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty threshold grid".into()));
    }
    let items: Vec<(&CohortMember, usize)> = cohort.iter().flat_map(|m| cfg.t_list.iter().map(move |&t| (m, t))).collect();
    let rows: Vec<Result<Vec<SweepRow>>> = items
        .par_iter()
        .map(|&(m, t)| {
            let c = estimate(&draw(cfg, m, t, 0)?, EstimatorKind::EmpiricalCorr)?;
            grid.iter()
                .map(|&tau| {
                    let conf = confusion(&fixed_threshold(&c, tau).adjacency, &m.support)?;
                    Ok(SweepRow { matrix_id: m.id, b: m.b, d: m.d, t, tau, accuracy: conf.accuracy(), confusion: conf })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(out)
}

pub fn threshold_sweep(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    with_pool(cfg, || {
        let cohort = build_cohort(cfg)?;
        threshold_sweep_on(cfg, &cohort, grid)
    })?
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.matrix_id, r.b, r.d, r.t, r.tau, r.accuracy));
    }
    out
}

/// Parses `a:b:step` into the inclusive grid `a, a + step, …, b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid `{spec}` is not of the form a:b:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts.iter().map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let (a, b, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect())
}
