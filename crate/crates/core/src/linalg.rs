//! Small linear-algebra layer: CSR storage for the assembled finite-element
//! matrices, column-major dense storage for interface-sized matrices, a
//! banded LU for the structured-grid systems and a thin wrapper over
//! `nalgebra` for dense complex factorizations.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean norm of a complex vector stored as separate real and imaginary parts.
pub fn complex_norm(re: &[f64], im: &[f64]) -> f64 {
    (dot(re, re) + dot(im, im)).sqrt()
}

pub fn cnorm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Real sparse matrix in compressed sparse row format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(i, j, v) in triplets {
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            rows[i].push((j, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `y += a A x`
    pub fn matvec_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += a * s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Complex matrix-vector product with a real matrix.
    pub fn mul_cvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| x[j] * v).sum())
            .collect()
    }

    /// Extracts the block with the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let col_map: HashMap<usize, usize> =
            cols.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut trip = Vec::new();
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if let Some(&cj) = col_map.get(&j) {
                    trip.push((ri, cj, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &trip)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn scaled(&self, a: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Sum of `a_k * A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let (nrows, ncols) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut trip = Vec::new();
        for &(a, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols));
            for i in 0..m.nrows {
                for (j, v) in m.row(i) {
                    trip.push((i, j, a * v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &trip)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                d.set(i, j, d.get(i, j) + v);
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        (0..self.nrows).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }

    /// Lower and upper bandwidth of the sparsity pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.nrows {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// Sparse product `A * X` with a dense right factor.
    pub fn mul_dense(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.ncols, x.nrows());
        let mut out = DenseMatrix::zeros(self.nrows, x.ncols());
        for c in 0..x.ncols() {
            self.matvec(x.col(c), out.col_mut(c));
        }
        out
    }
}

/// Real dense matrix in column-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_column_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Self { nrows, ncols, data }
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m.data[j * nrows + i] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.data.iter_mut().for_each(|v| *v *= a);
        self
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                axpy(xj, self.col(j), y);
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Applies a row/column index permutation: `out[map[i], map[j]] = self[i, j]`.
    pub fn scatter(&self, map: &[usize], size: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(size, size);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                out.set(map[i], map[j], self.get(i, j));
            }
        }
        out
    }
}

/// Field over which the banded factorization operates.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
    + std::fmt::Debug
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// LU factorization without pivoting of a banded matrix.
///
/// Only used for matrices whose Hermitian part is positive definite
/// (`K + i w M` with `K` SPD, or `M / tau + K`), for which elimination
/// without row exchanges is stable and keeps the fill inside the band.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    band: Vec<T>,
}

impl<T: Scalar> BandedLu<T> {
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    /// Assembles `sum_k coef_k * A_k` into band storage and factors it.
    pub fn factor_combination(terms: &[(T, &CsrMatrix)], context: &str) -> Result<Self>
    where
        T: Mul<f64, Output = T>,
    {
        let n = terms[0].1.nrows();
        let mut kl = 0;
        let mut ku = 0;
        for (_, m) in terms {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "banded factorization operand",
                    expected: n,
                    got: m.nrows(),
                });
            }
            let (l, u) = m.bandwidth();
            kl = kl.max(l);
            ku = ku.max(u);
        }
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            band: vec![T::zero(); n * (kl + ku + 1)],
        };
        for &(c, m) in terms {
            for i in 0..n {
                for (j, v) in m.row(i) {
                    let k = lu.idx(i, j);
                    lu.band[k] = lu.band[k] + c * v;
                }
            }
        }
        lu.factor(context)?;
        Ok(lu)
    }

    fn factor(&mut self, context: &str) -> Result<()> {
        let n = self.n;
        let max_diag = (0..n)
            .map(|i| self.band[self.idx(i, i)].modulus())
            .fold(0.0, f64::max);
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let pivot = self.band[self.idx(k, k)];
            let pm = pivot.modulus();
            min_pivot = min_pivot.min(pm);
            if !(pm > 1e-14 * max_diag) {
                return Err(Error::Singular {
                    context: context.to_string(),
                    condition: if pm > 0.0 { max_diag / pm } else { f64::INFINITY },
                });
            }
            let iend = (k + self.kl).min(n - 1);
            let jend = (k + self.ku).min(n - 1);
            for i in k + 1..=iend {
                let ik = self.idx(i, k);
                let l = self.band[ik] / pivot;
                self.band[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in k + 1..=jend {
                    let kj = self.band[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.band[ij] = self.band[ij] - l * kj;
                }
            }
        }
        log::trace!(
            "banded LU n={n} kl={} ku={} pivot ratio {:.3e}",
            self.kl,
            self.ku,
            max_diag / min_pivot
        );
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let j0 = i.saturating_sub(self.kl);
            let mut s = b[i];
            for (j, bj) in b.iter().enumerate().take(i).skip(j0) {
                s = s - self.band[self.idx(i, j)] * *bj;
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let jend = (i + self.ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jend {
                s = s - self.band[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.band[self.idx(i, i)];
        }
    }
}

/// Dense complex LU with partial pivoting.
pub struct DenseComplexLu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseComplexLu {
    pub fn new(matrix: DMatrix<C64>, context: &str) -> Result<Self> {
        let n = matrix.nrows();
        let lu = matrix.lu();
        let u = lu.u();
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if n > 0 && !(min > 1e-14 * max) {
            return Err(Error::Singular {
                context: context.to_string(),
                condition: if min > 0.0 { max / min } else { f64::INFINITY },
            });
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let rhs = nalgebra::DVector::from_column_slice(b);
        let x = self
            .lu
            .solve(&rhs)
            .expect("factorization checked nonsingular");
        x.as_slice().to_vec()
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Builds the complex dense matrix `sum a_k R_k + i sum b_k I_k`.
pub fn complex_dense(re: &[(f64, &DenseMatrix)], im: &[(f64, &DenseMatrix)], n: usize) -> DMatrix<C64> {
    let mut m = DMatrix::<C64>::zeros(n, n);
    for &(a, r) in re {
        if a == 0.0 {
            continue;
        }
        for j in 0..n {
            for i in 0..n {
                m[(i, j)].re += a * r.get(i, j);
            }
        }
    }
    for &(b, r) in im {
        if b == 0.0 {
            continue;
        }
        for j in 0..n {
            for i in 0..n {
                m[(i, j)].im += b * r.get(i, j);
            }
        }
    }
    m
}

/// Largest singular value of a complex dense matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn banded_real_solve_matches_dense() {
        let a = laplace_1d(12);
        let lu = BandedLu::<f64>::factor_combination(&[(1.0, &a)], "test").unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let mut b = a.mul_vec(&x);
        lu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_complex_solve_matches_nalgebra() {
        let k = laplace_1d(9);
        let m = CsrMatrix::from_triplets(9, 9, &(0..9).map(|i| (i, i, 0.5)).collect::<Vec<_>>());
        let w = 3.0;
        let lu = BandedLu::<C64>::factor_combination(
            &[(C64::new(1.0, 0.0), &k), (C64::new(0.0, w), &m)],
            "test",
        )
        .unwrap();
        let b: Vec<C64> = (0..9).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let dense = complex_dense(&[(1.0, &k.to_dense())], &[(w, &m.to_dense())], 9);
        let xd = DenseComplexLu::new(dense, "test").unwrap().solve(&b);
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_band_is_reported() {
        let z = CsrMatrix::from_triplets(3, 3, &[(0, 0, 1.0), (2, 2, 1.0)]);
        let err = BandedLu::<f64>::factor_combination(&[(1.0, &z)], "zero row").unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn submatrix_and_transpose() {
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1.0), (2, 0, 5.0), (1, 2, 7.0)]);
        let s = a.submatrix(&[2, 0], &[0, 1]);
        assert_eq!(s.get(0, 0), 5.0);
        assert_eq!(s.get(1, 1), 1.0);
        let t = a.transpose();
        assert_eq!(t.get(0, 2), 5.0);
        assert_eq!(t.get(2, 1), 7.0);
    }
}
