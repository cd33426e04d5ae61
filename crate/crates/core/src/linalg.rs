//! Sparse and small dense linear algebra kernels.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{MgError, Result};
use crate::scalar::Scalar;

/// Rows per rayon task in the sparse matvec.
const MATVEC_CHUNK: usize = 4096;

/// Compressed sparse row matrix. Symmetric operators store the full pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<T>,
}

/// Symmetric sparse operator (full pattern stored).
pub type SparseSym<T> = CsrMatrix<T>;

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            values: vec![T::one(); n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Duplicates are summed in input order, so two entries fed by mirrored
    /// contribution sequences come out bitwise equal.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(u32, u32, T)>) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (i, j, v) in triplets {
            assert!((i as usize) < nrows && (j as usize) < ncols, "triplet ({i}, {j}) out of range");
            if last == Some((i, j)) {
                *values.last_mut().expect("entry present") += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { nrows, ncols, indptr, indices, values }
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

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(p) => vals[p],
            Err(_) => T::zero(),
        }
    }

    /// Iterates over stored `(row, col, value)` entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j as usize, x))
        })
    }

    /// `y = A x`. Panics on a dimension mismatch.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "matvec: input dimension mismatch");
        assert_eq!(y.len(), self.nrows, "matvec: output dimension mismatch");
        y.par_chunks_mut(MATVEC_CHUNK).enumerate().for_each(|(chunk, ys)| {
            let base = chunk * MATVEC_CHUNK;
            for (o, yi) in ys.iter_mut().enumerate() {
                let (cols, vals) = self.row(base + o);
                let mut acc = T::zero();
                for (&j, &v) in cols.iter().zip(vals) {
                    acc += v * x[j as usize];
                }
                *yi = acc;
            }
        });
    }

    /// `y = A^T x`, computed by scattering rows.
    pub fn transpose_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.nrows, "transpose_matvec: dimension mismatch");
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j as usize] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix<T> {
        let trip = self.triplets().map(|(i, j, v)| (j as u32, i as u32, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix<T>) -> CsrMatrix<T> {
        assert_eq!(self.ncols, other.nrows, "matmul: inner dimension mismatch");
        let mut acc = vec![T::zero(); other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched: Vec<u32> = Vec::new();
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k as usize);
                for (&j, &b) in bc.iter().zip(bv) {
                    let ju = j as usize;
                    if mark[ju] != i {
                        mark[ju] = i;
                        acc[ju] = T::zero();
                        touched.push(j);
                    }
                    acc[ju] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                indices.push(j);
                values.push(acc[j as usize]);
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix { nrows: self.nrows, ncols: other.ncols, indptr, indices, values }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference `max |A_ij - B_ij|` over the union of patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix<T>) -> T {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch");
        let mut worst = T::zero();
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - other.get(i, j)).abs());
        }
        for (i, j, v) in other.triplets() {
            worst = worst.max((v - self.get(i, j)).abs());
        }
        worst
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        self.triplets().fold(T::zero(), |m, (i, j, v)| m.max((v - self.get(j, i)).abs()))
    }

    /// Dense copy of the block `A[rows, cols]`.
    pub fn dense_block(&self, rows: &[u32], cols: &[u32]) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self.get(i as usize, j as usize);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] = v;
        }
        out
    }

    /// Writes the matrix in coordinate text form: `row col value`, 1-based.
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{} {} {:e}", i + 1, j + 1, v.as_f64())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        DenseMatrix { nrows, ncols, data: vec![T::zero(); nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[T]) {
        assert_eq!(col.len(), self.nrows);
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols, "dense matvec: dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y += A^T x`.
    pub fn transpose_matvec_add(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.nrows, "dense transpose matvec: dimension mismatch");
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), y);
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(self.ncols, other.nrows, "dense matmul: inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a != T::zero() {
                    let orow = &mut out.data[i * other.ncols..(i + 1) * other.ncols];
                    axpy(a, other.row(k), orow);
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, s: T, other: &DenseMatrix<T>) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        axpy(s, &other.data, &mut self.data);
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix<T>) -> T {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.data.iter().zip(&other.data).fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
    }

    pub fn asymmetry(&self) -> T {
        assert_eq!(self.nrows, self.ncols);
        let mut worst = T::zero();
        for i in 0..self.nrows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for DenseMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

/// Cholesky factor `M = L L^T` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct CholeskyFactor<T> {
    dim: usize,
    /// Packed lower triangle, row by row.
    lower: Vec<T>,
}

impl<T: Scalar> CholeskyFactor<T> {
    /// Factors `m`, reading only its lower triangle.
    pub fn factor(m: &DenseMatrix<T>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(MgError::DimensionMismatch { expected: n, got: m.ncols() });
        }
        let mut lower = vec![T::zero(); n * (n + 1) / 2];
        let off = |i: usize| i * (i + 1) / 2;
        for i in 0..n {
            for j in 0..=i {
                let mut s = m[(i, j)];
                let (ri, rj) = (off(i), off(j));
                for k in 0..j {
                    s -= lower[ri + k] * lower[rj + k];
                }
                if i == j {
                    if s <= T::zero() || !s.is_finite() {
                        return Err(MgError::NotSpd { index: i, pivot: s.as_f64() });
                    }
                    lower[ri + i] = s.sqrt();
                } else {
                    lower[ri + j] = s / lower[rj + j];
                }
            }
        }
        Ok(CholeskyFactor { dim: n, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn off(i: usize) -> usize {
        i * (i + 1) / 2
    }

    pub fn l(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.lower[Self::off(i) + j]
        }
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [T]) {
        for i in 0..self.dim {
            let row = &self.lower[Self::off(i)..Self::off(i) + i + 1];
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `L^T x = y` in place.
    pub fn backward_in_place(&self, b: &mut [T]) {
        for i in (0..self.dim).rev() {
            let o = Self::off(i);
            let xi = b[i] / self.lower[o + i];
            b[i] = xi;
            for k in 0..i {
                b[k] -= self.lower[o + k] * xi;
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.dim, "cholesky solve: dimension mismatch");
        self.forward_in_place(b);
        self.backward_in_place(b);
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `L L^T`, for checking the factorization.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.dim, self.dim, |i, j| {
            (0..=i.min(j)).map(|k| self.l(i, k) * self.l(j, k)).sum()
        })
    }
}

/// Factors a dense SPD matrix.
pub fn dense_factor<T: Scalar>(m: &DenseMatrix<T>) -> Result<CholeskyFactor<T>> {
    CholeskyFactor::factor(m)
}

pub fn dense_solve<T: Scalar>(f: &CholeskyFactor<T>, b: &[T]) -> Vec<T> {
    f.solve(b)
}

pub fn dot<T: Scalar>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len(), "dot: dimension mismatch");
    // four independent partial sums keep the FPU pipeline busy
    let mut acc = [T::zero(); 4];
    let (xc, xr) = x.split_at(x.len() / 4 * 4);
    let (yc, yr) = y.split_at(xc.len());
    for (a, b) in xc.chunks_exact(4).zip(yc.chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += a[l] * b[l];
        }
    }
    let mut tail = T::zero();
    for (a, b) in xr.iter().zip(yr) {
        tail += *a * *b;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += a x`.
pub fn axpy<T: Scalar>(a: T, x: &[T], y: &mut [T]) {
    assert_eq!(x.len(), y.len(), "axpy: dimension mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

pub fn norm2<T: Scalar>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

/// Energy inner product `x^T A y`.
pub fn a_inner<T: Scalar>(a: &SparseSym<T>, x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), a.nrows(), "a_inner: dimension mismatch");
    dot(x, &a.matvec(y))
}

pub fn a_norm<T: Scalar>(a: &SparseSym<T>, x: &[T]) -> T {
    a_inner(a, x, x).max(T::zero()).sqrt()
}
