//! Dense symmetric matrix kernel.
//!
//! Everything in the benchmark is at most a few hundred rows wide, so the
//! matrices are stored densely (row-major, full square). The symmetric
//! eigensolver is delegated to `nalgebra`; Cholesky, triangular solves and
//! the PSD projection are implemented here.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest asymmetry silently repaired at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest Cholesky pivot accepted as positive.
pub const PIVOT_TOL: f64 = 1e-12;

/// Dense real symmetric `p × p` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, symmetrizing `(m + mᵀ)/2`.
    ///
    /// Fails when any pair differs by more than [`SYMMETRY_TOL`].
    pub fn from_row_major(p: usize, data: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if data.len() != p * p {
            return Err(Error::DimensionMismatch { expected: p * p, found: data.len() });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite entry at ({}, {})",
                bad / p,
                bad % p
            )));
        }
        for i in 0..p {
            for j in (i + 1)..p {
                let gap = (data[i * p + j] - data[j * p + i]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::Asymmetric { i, j, gap });
                }
            }
        }
        Ok(Self::symmetrized(p, data))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, found: r.len() });
        }
        Self::from_row_major(p, rows.concat())
    }

    /// Builds a matrix from a function evaluated on the upper triangle (`i <= j`).
    pub fn from_upper_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(p >= 1, "dimension must be at least 1");
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                data[i * p + j] = v;
                data[j * p + i] = v;
            }
        }
        Self { p, data }
    }

    /// Averages the two triangles unconditionally. Used for results that are
    /// symmetric up to rounding.
    pub(crate) fn symmetrized(p: usize, mut data: Vec<f64>) -> Self {
        for i in 0..p {
            for j in (i + 1)..p {
                let v = 0.5 * (data[i * p + j] + data[j * p + i]);
                data[i * p + j] = v;
                data[j * p + i] = v;
            }
        }
        Self { p, data }
    }

    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "dimension must be at least 1");
        Self { p, data: vec![0.0; p * p] }
    }

    pub fn identity(p: usize) -> Self {
        Self::diagonal(&vec![1.0; p])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
        self.data[j * self.p + i] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.p).map(<[f64]>::to_vec).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.p).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.p).map(|i| self.get(i, i)).sum()
    }

    /// Iterator over `(i, j, value)` with `i < j`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let p = self.p;
        (0..p).flat_map(move |i| ((i + 1)..p).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.p, other.p);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Entrywise linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SymMatrix, b: f64) -> SymMatrix {
        assert_eq!(self.p, other.p);
        let data = self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect();
        SymMatrix { p: self.p, data }
    }

    pub fn scale(&self, a: f64) -> SymMatrix {
        SymMatrix { p: self.p, data: self.data.iter().map(|x| a * x).collect() }
    }

    /// Full (generally non-symmetric) product, row-major.
    pub fn matmul(&self, other: &SymMatrix) -> Vec<f64> {
        assert_eq!(self.p, other.p);
        let p = self.p;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = self.data[i * p + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out[i * p..(i + 1) * p].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.p, self.p, &self.data)
    }
}

pub fn frobenius_distance(a: &SymMatrix, b: &SymMatrix) -> f64 {
    assert_eq!(a.p, b.p);
    a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Symmetric eigendecomposition with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Row-major `p × p`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<f64>,
}

impl SymEigen {
    pub fn p(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        let p = self.p();
        (0..p).map(|i| self.vectors[i * p + k]).collect()
    }

    /// `V · diag(f(λ)) · Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let p = self.p();
        let mapped: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let mut data = vec![0.0; p * p];
        for i in 0..p {
            for j in i..p {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += self.vectors[i * p + k] * mapped[k] * self.vectors[j * p + k];
                }
                data[i * p + j] = acc;
                data[j * p + i] = acc;
            }
        }
        SymMatrix { p, data }
    }
}

pub fn eig_sym(m: &SymMatrix) -> SymEigen {
    let p = m.p;
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = vec![0.0; p * p];
    for (col, &k) in order.iter().enumerate() {
        for i in 0..p {
            vectors[i * p + col] = eig.eigenvectors[(i, k)];
        }
    }
    SymEigen { values, vectors }
}

pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = m.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    eigenvalues(m)[0]
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    p: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.p + j]
    }

    /// Row-major lower factor.
    pub fn factor(&self) -> &[f64] {
        &self.l
    }

    /// `L·x`.
    pub fn mul_lower(&self, x: &[f64], out: &mut [f64]) {
        let p = self.p;
        for i in 0..p {
            let row = &self.l[i * p..i * p + i + 1];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Solves `L·y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let p = self.p;
        for i in 0..p {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.l[i * p + k] * b[k];
            }
            b[i] = acc / self.l[i * p + i];
        }
    }

    /// Solves `Lᵀ·x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let p = self.p;
        for i in (0..p).rev() {
            let mut acc = b[i];
            for k in (i + 1)..p {
                acc -= self.l[k * p + i] * b[k];
            }
            b[i] = acc / self.l[i * p + i];
        }
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.p).map(|i| self.l[i * self.p + i].ln()).sum::<f64>()
    }

    pub fn reconstruct(&self) -> SymMatrix {
        let p = self.p;
        SymMatrix::from_upper_fn(p, |i, j| (0..=i).map(|k| self.get(i, k) * self.get(j, k)).sum())
    }
}

pub fn cholesky(m: &SymMatrix) -> Result<Cholesky> {
    let p = m.p;
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if d <= PIVOT_TOL || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let djj = d.sqrt();
        l[j * p + j] = djj;
        for i in (j + 1)..p {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = s / djj;
        }
    }
    Ok(Cholesky { p, l })
}

pub fn inverse_spd(m: &SymMatrix) -> Result<SymMatrix> {
    let chol = cholesky(m)?;
    Ok(inverse_from_cholesky(&chol))
}

pub fn inverse_from_cholesky(chol: &Cholesky) -> SymMatrix {
    let p = chol.p;
    let mut data = vec![0.0; p * p];
    let mut col = vec![0.0; p];
    for j in 0..p {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        chol.solve_lower_in_place(&mut col);
        chol.solve_upper_in_place(&mut col);
        for i in 0..p {
            data[i * p + j] = col[i];
        }
    }
    SymMatrix::symmetrized(p, data)
}

/// Nearest matrix (Frobenius) whose eigenvalues are all `>= floor`.
///
/// Only the clipped eigen-directions are touched, so the input is returned
/// bit-for-bit when it already satisfies the floor.
pub fn project_psd(m: &SymMatrix, floor: f64) -> SymMatrix {
    project_psd_with_eigen(m, floor).0
}

/// As [`project_psd`], also returning the input's smallest eigenvalue.
pub fn project_psd_with_eigen(m: &SymMatrix, floor: f64) -> (SymMatrix, f64) {
    let eig = eig_sym(m);
    let min = eig.values[0];
    if min >= floor {
        return (m.clone(), min);
    }
    let p = m.p;
    let mut out = m.clone();
    for (k, &lambda) in eig.values.iter().enumerate() {
        if lambda >= floor {
            break;
        }
        let lift = floor - lambda;
        let v = eig.vector(k);
        for i in 0..p {
            let vi = lift * v[i];
            for j in i..p {
                out.data[i * p + j] += vi * v[j];
            }
        }
    }
    for i in 0..p {
        for j in (i + 1)..p {
            out.data[j * p + i] = out.data[i * p + j];
        }
    }
    (out, min)
}
