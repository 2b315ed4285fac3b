//! Small dense complex linear algebra: Hermitian matrices, Cholesky, Schur complements.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold used by [`cholesky`].
pub const CHOLESKY_REL_TOL: f64 = 1e-12;

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<Complex64>]) -> Self {
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<Complex64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn conj_transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn mul(&self, other: &ComplexMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols)
                .map(|k| self.get(i, k) * other.get(k, j))
                .sum()
        })
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Copy with every column scaled to unit Euclidean norm (zero columns are left as is).
    pub fn normalized_columns(&self) -> Self {
        let norms: Vec<f64> = (0..self.cols).map(|j| vec_norm(&self.column(j))).collect();
        Self::from_fn(self.rows, self.cols, |i, j| {
            if norms[j] > 0.0 {
                self.get(i, j) / norms[j]
            } else {
                self.get(i, j)
            }
        })
    }
}

/// Hermitian matrix stored densely, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Symmetrizes the input as `(a + a^H) / 2`.
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix of dim {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        let mut out = Self { dim, data };
        out.symmetrize();
        Ok(out)
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        let mut out = Self { dim, data };
        out.symmetrize();
        out
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch("matrix is not square".into()));
            }
            data.extend(r.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut out = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            out.data[i * d.len() + i] = Complex64::new(x, 0.0);
        }
        out
    }

    fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            let d = self.data[i * n + i];
            self.data[i * n + i] = Complex64::new(d.re, 0.0);
            for j in (i + 1)..n {
                let avg = (self.data[i * n + j] + self.data[j * n + i].conj()) * 0.5;
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn diag(&self, i: usize) -> f64 {
        self.data[i * self.dim + i].re
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.diag(i)).collect()
    }

    /// Adds `w * x x^H`.
    pub fn add_outer(&mut self, w: f64, x: &[Complex64]) {
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += x[i] * x[j].conj() * w;
            }
        }
    }

    pub fn add_diagonal(&mut self, d: &[f64]) {
        let n = self.dim;
        for (i, &x) in d.iter().enumerate() {
            self.data[i * n + i].re += x;
        }
    }

    pub fn add_identity(&mut self, s: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i].re += s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.diag(i)).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.diag(i))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Principal submatrix on `idx`, in the order given.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        Self {
            dim: idx.len(),
            data: idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.get(i, j))
                .collect(),
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..n).map(|j| self.data[i * n + j] * x[j]).sum())
            .collect()
    }

    /// `x^H A x`, real for Hermitian `A`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        inner(x, &self.mul_vec(x)).re
    }

    pub fn to_complex_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn determinant(&self) -> Result<f64> {
        Ok(cholesky(self)?.log_det().exp())
    }
}

/// Lower-triangular Cholesky factor of a Hermitian positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<Complex64>,
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> ComplexMatrix {
        ComplexMatrix::from_row_major(self.dim, self.dim, self.l.clone()).expect("square factor")
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.l[i * self.dim + j]
    }

    /// Natural log of the determinant of the factored matrix.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim).map(|i| self.at(i, i).re.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim;
        assert_eq!(b.len(), n, "right-hand side length");
        let mut y = b.to_vec();
        for i in 0..n {
            let s = y[i] - (0..i).map(|k| self.at(i, k) * y[k]).sum::<Complex64>();
            y[i] = s / self.at(i, i).re;
        }
        for i in (0..n).rev() {
            let s = y[i]
                - ((i + 1)..n)
                    .map(|k| self.at(k, i).conj() * y[k])
                    .sum::<Complex64>();
            y[i] = s / self.at(i, i).re;
        }
        y
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> HermitianMatrix {
        let n = self.dim;
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[j] = Complex64::new(1.0, 0.0);
            cols.push(self.solve(&e));
        }
        HermitianMatrix::from_fn(n, |i, j| cols[j][i])
    }
}

/// Factorizes `a = L L^H`, rejecting pivots at or below `1e-12 * max diagonal`.
pub fn cholesky(a: &HermitianMatrix) -> Result<Cholesky> {
    cholesky_with_tol(a, CHOLESKY_REL_TOL)
}

pub fn cholesky_with_tol(a: &HermitianMatrix, rel_tol: f64) -> Result<Cholesky> {
    let n = a.dim();
    let threshold = rel_tol * a.max_diagonal().max(0.0);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a.diag(j);
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > threshold) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / ljj;
        }
    }
    Ok(Cholesky { dim: n, l })
}

pub fn solve_hermitian(a: &HermitianMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, matrix dim {}",
            b.len(),
            a.dim()
        )));
    }
    Ok(cholesky(a)?.solve(b))
}

/// Schur complement of the leading `(m-1)`-block at position `m` (1-based).
pub fn schur_complement(a: &HermitianMatrix, m: usize) -> Result<f64> {
    assert!(
        m >= 1 && m <= a.dim(),
        "position {m} out of range 1..={}",
        a.dim()
    );
    let idx: Vec<usize> = (0..m - 1).collect();
    schur_given(a, m - 1, &idx)
}

/// Schur complement of `a[i][i]` with respect to the principal block on `cond`.
pub fn schur_given(a: &HermitianMatrix, i: usize, cond: &[usize]) -> Result<f64> {
    if cond.is_empty() {
        return Ok(a.diag(i));
    }
    let block = a.submatrix(cond);
    let col: Vec<Complex64> = cond.iter().map(|&j| a.get(j, i)).collect();
    let x = cholesky(&block)?.solve(&col);
    Ok(a.diag(i) - inner(&col, &x).re)
}

/// Eigenvalues in ascending order.
pub fn eigenvalues(a: &HermitianMatrix) -> Vec<f64> {
    let n = a.dim();
    if n == 0 {
        return Vec::new();
    }
    // Real embedding [[Re, -Im], [Im, Re]] carries every eigenvalue twice.
    let emb = DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = a.get(r % n, c % n);
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(emb)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev.into_iter().step_by(2).collect()
}

pub fn min_eigenvalue(a: &HermitianMatrix) -> f64 {
    eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// `1e-10 * trace / dim`, the default slack for PSD membership.
pub fn default_psd_tol(a: &HermitianMatrix) -> f64 {
    if a.dim() == 0 {
        return 0.0;
    }
    1e-10 * a.trace().abs() / a.dim() as f64
}

pub fn min_eigen_psd_check(a: &HermitianMatrix, tol: f64) -> bool {
    min_eigenvalue(a) >= -tol
}

pub fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
