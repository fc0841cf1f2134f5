//! Dense and sparse complex linear algebra used throughout the crate.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Binomial coefficient as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Integer binomial coefficient (exact for the small sizes used here).
pub fn binomial_usize(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Max-abs deviation of `a` from its adjoint.
pub fn hermiticity_deviation(a: &CMat) -> f64 {
    if !a.is_square() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Ties keep the order produced by the underlying solver, which is
/// deterministic for a given input.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    if a.iter().all(|z| z.im == 0.0) {
        // Real symmetric input: the real solver is several times faster.
        let re = a.map(|z| z.re);
        let eig = ((&re + re.transpose()) * 0.5).symmetric_eigen();
        let order = ascending(eig.eigenvalues.as_slice());
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, col| c(eig.eigenvectors[(r, order[col])]));
        return (values, vectors);
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let order = ascending(eig.eigenvalues.as_slice());
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    order
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigh(a).0.first().copied().unwrap_or(0.0)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_map(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = eigh(a);
    let d = CVec::from_iterator(vals.len(), vals.iter().map(|&v| c(f(v))));
    &vecs * CMat::from_diagonal(&d) * vecs.adjoint()
}

/// Trace norm, via singular values.
pub fn trace_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.is_square() && hermiticity_deviation(a) < 1e-13 {
        return eigh(a).0.iter().map(|v| v.abs()).sum();
    }
    a.clone().svd(false, false).singular_values.iter().sum()
}

/// Largest singular value.
pub fn operator_norm(a: &CMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Orthonormalizes the columns of `a` (thin QR). Fails on rank deficiency.
pub fn orthonormalize_columns(a: &CMat) -> Option<CMat> {
    let qr = a.clone().qr();
    let r = qr.r();
    for i in 0..r.ncols().min(r.nrows()) {
        if r[(i, i)].norm() < 1e-12 {
            return None;
        }
    }
    let mut q = qr.q();
    // Fix the phase so the diagonal of R is real positive.
    for i in 0..q.ncols() {
        let d = r[(i, i)];
        let phase = d / d.norm();
        let mut col = q.column_mut(i);
        col *= phase;
    }
    Some(q)
}

/// Orthonormal basis of the column range of `a`, keeping singular values
/// above `tol` times the largest one.
pub fn range_basis(a: &CMat, tol: f64) -> CMat {
    if a.ncols() == 0 || a.nrows() == 0 {
        return CMat::zeros(a.nrows(), 0);
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > tol * smax)
        .collect();
    CMat::from_fn(a.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

/// Projects `v` onto the orthogonal complement of `frame`'s columns and normalizes.
pub fn gram_schmidt_against(v: &CVec, frame: &[CVec]) -> Option<CVec> {
    let mut w = v.clone();
    for _ in 0..2 {
        for f in frame {
            let overlap = f.dotc(&w);
            w -= f * overlap;
        }
    }
    let n = w.norm();
    if n < 1e-12 {
        None
    } else {
        Some(w / c(n))
    }
}

/// Row-major sparse complex matrix with sorted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, rows: vec![Vec::new(); nrows] }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, rows: (0..n).map(|i| vec![(i, c(1.0))]).collect() }
    }

    /// Builds a matrix from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); nrows];
        for (i, j, v) in triplets {
            debug_assert!(i < nrows && j < ncols);
            *acc[i].entry(j).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let rows = acc
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| *v != C64::new(0.0, 0.0)).collect())
            .collect();
        Self { nrows, ncols, rows }
    }

    pub fn from_dense(a: &CMat) -> Self {
        let triplets = (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| (i, j))).filter_map(|(i, j)| {
            let v = a[(i, j)];
            (v != C64::new(0.0, 0.0)).then_some((i, j, v))
        });
        Self::from_triplets(a.nrows(), a.ncols(), triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(usize, C64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self.rows[i].binary_search_by_key(&j, |(k, _)| *k) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j, v)))
    }

    pub fn matvec(&self, x: &CVec) -> CVec {
        assert_eq!(x.len(), self.ncols);
        CVec::from_iterator(
            self.nrows,
            self.rows.iter().map(|row| row.iter().map(|&(j, v)| v * x[j]).sum::<C64>()),
        )
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            rows: self.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, v * s)).collect()).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(self.nrows, self.ncols, self.triplets().chain(other.triplets()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(c(-1.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let triplets = self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter().flat_map(move |&(k, a)| other.rows[k].iter().map(move |&(j, b)| (i, j, a * b)))
        });
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    pub fn to_dense(&self) -> CMat {
        let mut out = CMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            out[(i, j)] += v;
        }
        out
    }

    /// Dense copy of the sub-block `rows × cols`.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> CMat {
        let mut out = CMat::zeros(rows.len(), cols.len());
        for (bi, i) in rows.clone().enumerate() {
            for &(j, v) in &self.rows[i] {
                if cols.contains(&j) {
                    out[(bi, j - cols.start)] += v;
                }
            }
        }
        out
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).triplets().map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.triplets().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }
}
