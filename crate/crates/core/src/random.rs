//! Deterministic random generators for test batteries and solver restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, CMat, CVec, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| complex_normal(rng))
}

pub fn unit_vector<R: Rng>(rng: &mut R, n: usize) -> CVec {
    let v = gaussian_vector(rng, n);
    let norm = v.norm();
    v / c(norm)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-like unitary from the QR factorization of a Ginibre matrix.
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    crate::linalg::orthonormalize_columns(&g).expect("Ginibre matrix is almost surely invertible")
}

/// `k` orthonormal columns in dimension `n`.
pub fn frame<R: Rng>(rng: &mut R, n: usize, k: usize) -> CMat {
    let g = gaussian_matrix(rng, n, k);
    crate::linalg::orthonormalize_columns(&g).expect("Ginibre frame is almost surely full rank")
}

/// Random contraction with operator norm `scale` (< 1 keeps it strictly inside).
pub fn contraction<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMat {
    let g = gaussian_matrix(rng, n, n);
    let norm = crate::linalg::operator_norm(&g);
    g.scale(scale / norm)
}

/// Random density matrix of the given rank on an `n`-dimensional space.
pub fn density<R: Rng>(rng: &mut R, n: usize, rank: usize) -> CMat {
    let a = gaussian_matrix(rng, n, rank.max(1));
    let rho = &a * a.adjoint();
    let tr = crate::linalg::trace(&rho).re;
    rho / c(tr)
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
