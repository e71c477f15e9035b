//! Ground-truth matrix generation under a prescribed zero pattern and a
//! lower bound on the mean of the nonzero off-diagonal coefficients.
//!
//! The generated matrix is the Euclidean projection of a target `Σ̄` onto
//! the intersection of
//!
//! * `C1 = {λ_min(Σ) ≥ ε}`,
//! * `C2 = {Σ_ij = 0 off the support, Σ_ii = 1}`,
//! * `C3 = {mean of Σ_ij over the support ≥ b}`,
//!
//! computed with Dykstra's alternating projections (Anderson-accelerated) in the order
//! `C2 → C3 → C1`, so every iterate leaves the last step positive definite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chordal::{random_chordal, Adjacency};
use crate::error::{Error, Result};
use crate::gauss::{derive_seed, Mode, Rng};
use crate::matrix_text;
use crate::symlin::{min_eigenvalue, project_psd, SymMatrix};
use nalgebra::{DMatrix, DVector};

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Verbatim output tolerances of a feasible result.
pub const ZERO_PATTERN_TOL: f64 = 1e-8;
pub const DIAGONAL_TOL: f64 = 1e-9;
pub const EIGEN_TOL: f64 = 1e-9;
pub const MEAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConstraints {
    pub support: Adjacency,
    pub b: f64,
    pub mode: Mode,
    pub epsilon: f64,
    pub unit_diagonal: bool,
}

impl GenerationConstraints {
    pub fn new(support: Adjacency, b: f64, mode: Mode) -> Result<Self> {
        Self::with_options(support, b, mode, DEFAULT_EPSILON, true)
    }

    pub fn with_options(support: Adjacency, b: f64, mode: Mode, epsilon: f64, unit_diagonal: bool) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::InvalidArgument(format!("signal level b = {b} outside (0, 1)")));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self { support, b, mode, epsilon, unit_diagonal })
    }

    pub fn p(&self) -> usize {
        self.support.p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Feasible,
    Infeasible,
}

/// Constraint violations of a candidate matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// Max |Σ_ij| off the support.
    pub zero_pattern: f64,
    /// Max |Σ_ii − 1| (zero when the diagonal is free).
    pub diagonal: f64,
    /// `max(b − support mean, 0)`.
    pub mean_shortfall: f64,
    /// `max(ε − λ_min, 0)`.
    pub eigen_shortfall: f64,
}

impl Residuals {
    pub fn within_tolerance(&self) -> bool {
        self.zero_pattern <= ZERO_PATTERN_TOL
            && self.diagonal <= DIAGONAL_TOL
            && self.mean_shortfall <= MEAN_TOL
            && self.eigen_shortfall <= EIGEN_TOL
    }

    pub fn max(&self) -> f64 {
        self.zero_pattern.max(self.diagonal).max(self.mean_shortfall).max(self.eigen_shortfall)
    }
}

#[derive(Debug, Clone)]
pub struct GenerationResult {
    pub matrix: SymMatrix,
    pub status: Status,
    /// Completed projection cycles.
    pub iterations: usize,
    pub residuals: Residuals,
}

impl GenerationResult {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    pub fn require_feasible(self) -> Result<SymMatrix> {
        match self.status {
            Status::Feasible => Ok(self.matrix),
            Status::Infeasible => Err(Error::Infeasible { iterations: self.iterations, residual: self.residuals.max() }),
        }
    }
}

/// Iteration controls for [`dykstra_project_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DykstraOptions {
    pub max_cycles: usize,
    /// Convergence: max entry change over one cycle.
    pub step_tol: f64,
    /// Residuals below this never count as stalled.
    pub stall_residual: f64,
    pub stall_window: usize,
    /// Minimum improvement factor of the best residual per window.
    pub stall_factor: f64,
    /// Early acceptance: a cycle change below this is enough when the
    /// finished matrix already meets every tolerance.
    pub accept_tol: f64,
    /// Anderson history length; 0 gives plain Dykstra.
    pub anderson_memory: usize,
}

impl Default for DykstraOptions {
    fn default() -> Self {
        Self { max_cycles: 50_000, step_tol: 1e-9, stall_residual: 1e-6, stall_window: 1_000, stall_factor: 1.01, accept_tol: 1e-7, anderson_memory: 5 }
    }
}

/// Mean of the support entries (each unordered pair counted once).
pub fn support_mean(m: &SymMatrix, support: &Adjacency) -> f64 {
    let edges = support.edges();
    if edges.is_empty() {
        return 0.0;
    }
    edges.iter().map(|&(i, j)| m.get(i, j)).sum::<f64>() / edges.len() as f64
}

/// Violations of `m` with respect to `c`. Costs one eigendecomposition.
pub fn residuals(m: &SymMatrix, c: &GenerationConstraints) -> Residuals {
    let mut r = pattern_residuals(m, c);
    r.eigen_shortfall = (c.epsilon - min_eigenvalue(m)).max(0.0);
    r
}

fn pattern_residuals(m: &SymMatrix, c: &GenerationConstraints) -> Residuals {
    let p = m.p();
    let mut zero_pattern: f64 = 0.0;
    let mut diagonal: f64 = 0.0;
    for i in 0..p {
        if c.unit_diagonal {
            diagonal = diagonal.max((m.get(i, i) - 1.0).abs());
        }
        for j in (i + 1)..p {
            if !c.support.has_edge(i, j) {
                zero_pattern = zero_pattern.max(m.get(i, j).abs());
            }
        }
    }
    let mean_shortfall = (c.b - support_mean(m, &c.support)).max(0.0);
    Residuals { zero_pattern, diagonal, mean_shortfall, eigen_shortfall: 0.0 }
}

/// Target `Σ̄`: unit diagonal, support entries i.i.d. uniform on `[0.2, 0.9]`.
pub fn make_target(support: &Adjacency, seed: u64) -> SymMatrix {
    let mut rng = Rng::substream(seed, "target");
    let mut m = SymMatrix::identity(support.p().max(1));
    for (i, j) in support.edges() {
        m.set(i, j, rng.uniform_range(0.2, 0.9));
    }
    m
}

/// Projection onto C2: zero off the support, unit diagonal.
fn project_pattern(m: &mut SymMatrix, c: &GenerationConstraints) {
    let p = m.p();
    let data = m.data_mut();
    for i in 0..p {
        if c.unit_diagonal {
            data[i * p + i] = 1.0;
        }
        for j in (i + 1)..p {
            if !c.support.has_edge(i, j) {
                data[i * p + j] = 0.0;
                data[j * p + i] = 0.0;
            }
        }
    }
}

/// Projection onto C3: uniform shift of every support entry.
fn project_mean(m: &mut SymMatrix, c: &GenerationConstraints, edges: &[(usize, usize)]) -> f64 {
    let mean = edges.iter().map(|&(i, j)| m.get(i, j)).sum::<f64>() / edges.len() as f64;
    if mean >= c.b {
        return 0.0;
    }
    let shift = c.b - mean;
    for &(i, j) in edges {
        let v = m.get(i, j) + shift;
        m.set(i, j, v);
    }
    shift
}

pub fn dykstra_project(target: &SymMatrix, c: &GenerationConstraints) -> Result<GenerationResult> {
    dykstra_project_with(target, c, &DykstraOptions::default())
}

/// One Dykstra cycle as a fixed-point map.
///
/// The pattern set is affine, so its correction term never changes the
/// projection and is dropped. What remains is the point `w` fed to the PSD
/// projection (which also carries the PSD correction `w − P(w)`) and the
/// scalar correction `s` of the mean half-space, packed as `[w..., s]`.
struct CycleMap<'a> {
    c: &'a GenerationConstraints,
    edges: Vec<(usize, usize)>,
}

impl CycleMap<'_> {
    /// Returns `G(state)` and the PSD iterate `P_C1(w)`.
    fn apply(&self, state: &[f64]) -> (Vec<f64>, SymMatrix) {
        let p = self.c.p();
        let w = SymMatrix::symmetrized(p, state[..p * p].to_vec());
        let s = state[p * p].max(0.0);
        let z = project_psd(&w, self.c.epsilon);

        // undo the previous mean correction, then C2, then C3
        let mut u = z.clone();
        for &(i, j) in &self.edges {
            let v = u.get(i, j) - s;
            u.set(i, j, v);
        }
        project_pattern(&mut u, self.c);
        let shift = project_mean(&mut u, self.c, &self.edges);

        let mut next = Vec::with_capacity(p * p + 1);
        next.extend(u.as_slice().iter().zip(w.as_slice()).zip(z.as_slice()).map(|((u, w), z)| u + (w - z)));
        next.push(shift);
        (next, z)
    }
}

/// Least-squares mixing of the last few map evaluations (type-II Anderson).
struct Anderson {
    memory: usize,
    df: Vec<Vec<f64>>,
    dg: Vec<Vec<f64>>,
    last: Option<(Vec<f64>, Vec<f64>)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, df: Vec::new(), dg: Vec::new(), last: None }
    }

    fn reset(&mut self) {
        self.df.clear();
        self.dg.clear();
        self.last = None;
    }

    /// Next state given `g = G(x)` and the residual `f = g − x`.
    fn step(&mut self, g: Vec<f64>, f: Vec<f64>) -> Vec<f64> {
        if self.memory == 0 {
            return g;
        }
        if let Some((lf, lg)) = self.last.take() {
            self.df.push(f.iter().zip(&lf).map(|(a, b)| a - b).collect());
            self.dg.push(g.iter().zip(&lg).map(|(a, b)| a - b).collect());
            if self.df.len() > self.memory {
                self.df.remove(0);
                self.dg.remove(0);
            }
        }
        self.last = Some((f.clone(), g.clone()));
        if self.df.is_empty() {
            return g;
        }
        let n = f.len();
        let a = DMatrix::from_fn(n, self.df.len(), |r, k| self.df[k][r]);
        let svd = a.svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max();
        let Ok(gamma) = svd.solve(&DVector::from_column_slice(&f), cutoff) else {
            self.reset();
            return g;
        };
        let mut next = g;
        for (k, gk) in gamma.iter().enumerate() {
            for (x, d) in next.iter_mut().zip(&self.dg[k]) {
                *x -= gk * d;
            }
        }
        next
    }
}

/// Dykstra's projections, run as an Anderson-accelerated fixed-point
/// iteration over one full `C2 → C3 → C1` cycle.
///
/// A cycle counts as converged once its max entry change is below
/// `accept_tol` and the finished matrix meets every output tolerance, or
/// once the change drops below `step_tol`. Infeasibility is declared when
/// the best pattern residual stays above `stall_residual` without improving
/// by `stall_factor` over a `stall_window`, or at `max_cycles`.
pub fn dykstra_project_with(target: &SymMatrix, c: &GenerationConstraints, opts: &DykstraOptions) -> Result<GenerationResult> {
    let p = target.p();
    if c.p() != p {
        return Err(Error::DimensionMismatch { expected: c.p(), found: p });
    }
    let edges = c.support.edges();
    if edges.is_empty() {
        return Err(Error::InvalidArgument("support has no edges".into()));
    }
    let map = CycleMap { c, edges };
    let mut accel = Anderson::new(opts.anderson_memory);

    let mut x: Vec<f64> = target.as_slice().to_vec();
    x.push(0.0);
    let mut best_change = f64::INFINITY;
    let mut best_state = x.clone();
    let mut best_residual = f64::INFINITY;
    let mut best_at_window_start = f64::INFINITY;
    let mut last = Residuals::default();
    let mut z = target.clone();
    let mut cycles = 0;

    while cycles < opts.max_cycles {
        cycles += 1;
        let cycle = cycles;
        let (g, zk) = map.apply(&x);
        z = zk;
        let f: Vec<f64> = g.iter().zip(&x).map(|(a, b)| a - b).collect();
        let change = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

        last = pattern_residuals(&z, c);
        best_residual = best_residual.min(last.max());

        if change <= opts.step_tol || (change <= opts.accept_tol && cycle % 10 == 0) {
            if let Some(done) = finish(&z, c, cycle) {
                return Ok(done);
            }
        }

        if cycle % opts.stall_window == 0 {
            let stalled = best_residual > opts.stall_residual && best_residual * opts.stall_factor > best_at_window_start;
            if stalled {
                break;
            }
            best_at_window_start = best_residual;
        }

        if !change.is_finite() || change > 1e4 * best_change {
            // the extrapolation diverged: restart from the best state seen
            accel.reset();
            x = map.apply(&best_state).0;
            continue;
        }
        if change < best_change {
            best_change = change;
            best_state.clone_from(&x);
        }
        x = accel.step(g, f);
    }
    if let Some(done) = finish(&z, c, cycles) {
        return Ok(done);
    }
    Ok(GenerationResult { matrix: z, status: Status::Infeasible, iterations: cycles, residuals: last })
}

/// Masks the iterate onto the exact pattern and checks every output
/// tolerance.
///
/// Masking can push `λ_min` a hair under `ε`; that is repaired by blending
/// with the identity, `(1 − t)Σ + tI`, which keeps the pattern and the unit
/// diagonal exact and lifts every eigenvalue affinely.
fn finish(x: &SymMatrix, c: &GenerationConstraints, cycle: usize) -> Option<GenerationResult> {
    const MAX_BLEND: f64 = 1e-6;
    let mut polished = x.clone();
    project_pattern(&mut polished, c);
    let lambda = min_eigenvalue(&polished);
    if lambda < c.epsilon {
        let t = (c.epsilon - lambda) / (1.0 - lambda) * (1.0 + 1e-6);
        if !(t <= MAX_BLEND) {
            return None;
        }
        let p = polished.p();
        polished = polished.combine(1.0 - t, &SymMatrix::identity(p), t);
        if c.unit_diagonal {
            project_pattern(&mut polished, c);
        }
    }
    let residuals = residuals(&polished, c);
    residuals
        .within_tolerance()
        .then_some(GenerationResult { matrix: polished, status: Status::Feasible, iterations: cycle, residuals })
}

/// A random chordal support of density `d` and its target, keyed on `(b, d, seed)`.
pub fn cell_draw(p: usize, d: f64, seed: u64) -> Result<(Adjacency, SymMatrix)> {
    let support = random_chordal(p, d, derive_seed(seed, "support"))?;
    let target = make_target(&support, derive_seed(seed, "target"));
    Ok((support, target))
}

/// Sub-seed of draw `k` in cell `(b, d)`.
pub fn cell_seed(seed: u64, b: f64, d: f64, k: usize) -> u64 {
    derive_seed(seed, &format!("cell/{b}/{d}/{k}"))
}

/// One generation attempt for a `(b, d)` cell.
pub fn generate_cell(p: usize, b: f64, d: f64, mode: Mode, seed: u64) -> Result<(Adjacency, GenerationResult)> {
    let (support, target) = cell_draw(p, d, seed)?;
    if support.n_edges() == 0 {
        return Err(Error::InvalidArgument(format!("density {d} gives no edges at p = {p}")));
    }
    let c = GenerationConstraints::new(support.clone(), b, mode)?;
    let result = dykstra_project(&target, &c)?;
    Ok((support, result))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCell {
    pub b: f64,
    pub d: f64,
    pub seeds: usize,
    pub feasible: usize,
}

/// Attempts `seeds_per_cell` independent draws per `(b, d)` cell.
///
/// Cells are evaluated on the current rayon pool; output order follows
/// `b_grid` outer, `d_grid` inner.
pub fn feasibility_map(p: usize, b_grid: &[f64], d_grid: &[f64], seeds_per_cell: usize, seed: u64) -> Result<Vec<FeasibilityCell>> {
    if b_grid.is_empty() || d_grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if let Some(v) = b_grid.iter().chain(d_grid).find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::InvalidArgument(format!("grid value {v} outside (0, 1)")));
    }
    let tasks: Vec<(usize, f64, f64, usize)> = b_grid
        .iter()
        .flat_map(|&b| d_grid.iter().map(move |&d| (b, d)))
        .enumerate()
        .flat_map(|(cell, (b, d))| (0..seeds_per_cell).map(move |k| (cell, b, d, k)))
        .collect();
    let outcomes: Vec<(usize, bool)> = tasks
        .par_iter()
        .map(|&(cell, b, d, k)| {
            let ok = match generate_cell(p, b, d, Mode::Covariance, cell_seed(seed, b, d, k)) {
                Ok((_, r)) => r.is_feasible(),
                Err(_) => false,
            };
            (cell, ok)
        })
        .collect();
    let mut cells: Vec<FeasibilityCell> = b_grid
        .iter()
        .flat_map(|&b| d_grid.iter().map(move |&d| FeasibilityCell { b, d, seeds: seeds_per_cell, feasible: 0 }))
        .collect();
    for (cell, ok) in outcomes {
        cells[cell].feasible += usize::from(ok);
    }
    Ok(cells)
}

pub fn feasibility_csv(cells: &[FeasibilityCell]) -> String {
    let mut out = String::from("b,d,seeds,feasible\n");
    for c in cells {
        out.push_str(&format!("{},{},{},{}\n", c.b, c.d, c.seeds, c.feasible));
    }
    out
}

/// Text form of a generated matrix.
pub fn generated_matrix_text(m: &SymMatrix, mode: Mode, b: f64, d: f64, seed: u64) -> String {
    matrix_text::write_matrix(
        &[("mode", mode.to_string()), ("b", b.to_string()), ("d", d.to_string()), ("seed", seed.to_string())],
        m,
    )
}
