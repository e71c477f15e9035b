use rayon::prelude::*;

use super::config::{CohortSpec, ExperimentConfig};
use crate::chordal::Adjacency;
use crate::error::{Error, Result};
use crate::gauss::derive_seed;
use crate::psdgen::{cell_seed, generate_cell, generated_matrix_text, support_mean};
use crate::symlin::SymMatrix;

/// Draws tried per explicit cell before it counts as infeasible.
const EXPLICIT_ATTEMPTS: usize = 5;
/// A `b` scan stops after this many consecutive infeasible cells.
const SCAN_STOP: usize = 2;

/// One ground-truth matrix of the cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub id: usize,
    /// Requested support-mean floor.
    pub b_nominal: f64,
    /// Realized support mean (`>= b_nominal - 1e-6`).
    pub b: f64,
    /// Requested density.
    pub d_nominal: f64,
    /// Realized density `|E| / m`.
    pub d: f64,
    pub seed: u64,
    pub support: Adjacency,
    pub matrix: SymMatrix,
    pub iterations: usize,
}

impl CohortMember {
    pub fn matrix_text(&self, cfg: &ExperimentConfig) -> String {
        generated_matrix_text(&self.matrix, cfg.mode, self.b_nominal, self.d, self.seed)
    }
}

pub fn cohort_csv(cohort: &[CohortMember]) -> String {
    let mut out = String::from("matrix_id,b_nominal,b,d_nominal,d,n_edges,seed,iterations\n");
    for m in cohort {
        out.push_str(&format!("{},{},{},{},{},{},{},{}\n", m.id, m.b_nominal, m.b, m.d_nominal, m.d, m.support.n_edges(), m.seed, m.iterations));
    }
    out
}

#[derive(Debug, Clone)]
struct Candidate {
    b: f64,
    d: f64,
    seed: u64,
    support: Adjacency,
    matrix: SymMatrix,
    iterations: usize,
}

fn attempt(cfg: &ExperimentConfig, b: f64, d: f64, seed: u64) -> Option<Candidate> {
    let (support, result) = generate_cell(cfg.p, b, d, cfg.mode, seed).ok()?;
    let iterations = result.iterations;
    let matrix = result.require_feasible().ok()?;
    Some(Candidate { b, d, seed, support, matrix, iterations })
}

/// Values `start + k·step` strictly inside `(start, 1)`, rounded to 1e-9.
fn open_grid(start: f64, step: f64) -> Vec<f64> {
    (1..)
        .map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9)
        .take_while(|&v| v < 1.0)
        .collect()
}

/// The `(b, d)` grid scanned in `auto` mode.
pub fn auto_grid(cfg: &ExperimentConfig) -> (Vec<f64>, Vec<f64>) {
    (open_grid(cfg.b_min, cfg.grid_step), open_grid(0.0, cfg.grid_step))
}

fn decile(d: f64) -> usize {
    ((d * 10.0 + 1e-9).floor() as usize).min(9)
}

/// Proportional allocation of `n` over strata of the given sizes (largest
/// remainder, ties to the lower stratum).
fn allocate(n: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| n * s / total).collect();
    let mut rest: Vec<(usize, usize)> = sizes.iter().enumerate().map(|(k, &s)| ((n * s) % total, k)).collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let missing = n - alloc.iter().sum::<usize>();
    for &(_, k) in rest.iter().take(missing) {
        alloc[k] += 1;
    }
    alloc
}

/// Picks `n` cells spread over d-deciles in proportion to their feasible
/// counts, then evenly over `b` within each decile.
fn stratified_selection(mut cands: Vec<Candidate>, n: usize) -> Vec<Candidate> {
    cands.sort_by(|x, y| decile(x.d).cmp(&decile(y.d)).then(x.b.total_cmp(&y.b)).then(x.d.total_cmp(&y.d)));
    let mut strata: Vec<Vec<Candidate>> = vec![Vec::new(); 10];
    for c in cands {
        strata[decile(c.d)].push(c);
    }
    let sizes: Vec<usize> = strata.iter().map(Vec::len).collect();
    let alloc = allocate(n, &sizes);
    let mut chosen = Vec::with_capacity(n);
    for (stratum, k) in strata.into_iter().zip(alloc) {
        let len = stratum.len();
        let picks: Vec<usize> = (0..k).map(|i| ((2 * i + 1) * len) / (2 * k)).collect();
        chosen.extend(stratum.into_iter().enumerate().filter(|(i, _)| picks.contains(i)).map(|(_, c)| c));
    }
    chosen
}

/// Scans `b` upward in one `d` column until the region ends.
fn scan_column(cfg: &ExperimentConfig, b_grid: &[f64], d: f64, cohort_seed: u64) -> Vec<Candidate> {
    let mut found = Vec::new();
    let mut misses = 0;
    for &b in b_grid {
        match attempt(cfg, b, d, cell_seed(cohort_seed, b, d, 0)) {
            Some(c) => {
                misses = 0;
                found.push(c);
            }
            None => {
                misses += 1;
                if misses >= SCAN_STOP {
                    break;
                }
            }
        }
    }
    found
}

/// Builds the ground-truth cohort on the current rayon pool.
///
/// Every returned matrix passed the generation tolerances. Output is
/// deterministic for a given config and independent of the worker count.
pub fn build_cohort(cfg: &ExperimentConfig) -> Result<Vec<CohortMember>> {
    cfg.validate()?;
    let cohort_seed = derive_seed(cfg.master_seed, "cohort");
    let chosen: Vec<Candidate> = match &cfg.cohort {
        CohortSpec::Cells(cells) => {
            let found: Vec<Option<Candidate>> = cells
                .par_iter()
                .enumerate()
                .map(|(k, cell)| {
                    let base = derive_seed(cohort_seed, &format!("explicit/{k}"));
                    (0..EXPLICIT_ATTEMPTS).find_map(|a| attempt(cfg, cell.b, cell.d, cell_seed(base, cell.b, cell.d, a)))
                })
                .collect();
            let ok = found.iter().filter(|c| c.is_some()).count();
            if ok < cells.len() {
                return Err(Error::CohortInfeasible { found: ok, required: cells.len() });
            }
            found.into_iter().flatten().collect()
        }
        CohortSpec::Auto => {
            let (b_grid, d_grid) = auto_grid(cfg);
            let cands: Vec<Candidate> =
                d_grid.par_iter().map(|&d| scan_column(cfg, &b_grid, d, cohort_seed)).collect::<Vec<_>>().into_iter().flatten().collect();
            if cands.len() < cfg.cohort_size {
                return Err(Error::CohortInfeasible { found: cands.len(), required: cfg.cohort_size });
            }
            let mut picked = stratified_selection(cands, cfg.cohort_size);
            picked.sort_by(|x, y| x.d.total_cmp(&y.d).then(x.b.total_cmp(&y.b)));
            picked
        }
    };
    Ok(chosen
        .into_iter()
        .enumerate()
        .map(|(id, c)| CohortMember {
            id,
            b_nominal: c.b,
            b: support_mean(&c.matrix, &c.support),
            d_nominal: c.d,
            d: c.support.density(),
            seed: c.seed,
            support: c.support,
            matrix: c.matrix,
            iterations: c.iterations,
        })
        .collect())
}
