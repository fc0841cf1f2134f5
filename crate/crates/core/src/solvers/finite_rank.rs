//! Rank-constrained minimization (`E_r(N)`) and Hartree-Fock SCF.
//!
//! The finite-rank energy is minimized by alternating an exact CI step in the
//! span of `r` orthonormal orbitals with a projected-gradient step on the
//! orbitals (QR retraction, Armijo backtracking).

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{sector_hamiltonian, tensor_embedding, FockBasis, Statistics};
use crate::linalg::{c, eigh, hermitian_part, orthonormalize_columns, CMat, CVec};
use crate::onebody::{OneBodyOperator, TwoBodyKernel};
use crate::random;
use crate::solvers::exact::sector_ground_state;
use crate::states::{density_matrix, MixedState};

#[derive(Debug, Clone, Serialize)]
pub struct FiniteRankResult {
    pub n: usize,
    pub r: usize,
    pub energy: f64,
    #[serde(skip)]
    pub orbitals: CMat,
    /// Configuration amplitudes in the wedge/vee basis of the orbitals.
    #[serde(skip)]
    pub coefficients: CVec,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub restart_energies: Vec<f64>,
}

impl FiniteRankResult {
    /// `‖Φ*Φ − 1‖` (Frobenius).
    pub fn gram_deviation(&self) -> f64 {
        (self.orbitals.adjoint() * &self.orbitals - CMat::identity(self.r, self.r)).norm()
    }
}

#[derive(Debug, Clone)]
pub struct FiniteRankOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Starting orbitals for the first restart (default: lowest eigenvectors of `h`).
    pub initial: Option<CMat>,
}

impl Default for FiniteRankOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, max_iterations: 3_000, gradient_tolerance: 1e-6, initial: None }
    }
}

struct Problem<'a> {
    h: &'a CMat,
    w: &'a TwoBodyKernel,
    n: usize,
    stats: Statistics,
    w_tensor: Vec<(usize, usize, usize, usize, crate::linalg::C64)>,
}

struct CiPoint {
    energy: f64,
    coefficients: CVec,
    small: FockBasis,
}

impl<'a> Problem<'a> {
    fn new(h: &'a OneBodyOperator, w: &'a TwoBodyKernel, n: usize) -> Result<Self> {
        if w.modes() != h.dim() {
            return Err(Error::DimensionMismatch { expected: h.dim(), found: w.modes() });
        }
        Ok(Self { h: h.matrix(), w, n, stats: w.statistics(), w_tensor: w.entries().to_vec() })
    }

    fn ci(&self, phi: &CMat) -> Result<CiPoint> {
        let r = phi.ncols();
        let small = FockBasis::new(r, self.n, self.stats)?;
        let hs = OneBodyOperator::new(hermitian_part(&(phi.adjoint() * self.h * phi)), "projected")?;
        let ws = if self.w.is_zero() || self.n < 2 { TwoBodyKernel::zero(r, self.stats) } else { self.w.rotated(phi)? };
        let m = sector_hamiltonian(&small, &hs, &ws, self.n)?;
        let g = sector_ground_state(&m, self.n)?;
        Ok(CiPoint { energy: g.energy, coefficients: g.ground_vector, small })
    }

    /// Euclidean gradient `2 ∂E/∂Φ̄` at fixed configuration amplitudes.
    fn gradient(&self, phi: &CMat, point: &CiPoint) -> Result<CMat> {
        let state = MixedState::nbody(&point.small, self.n, &point.coefficients)?;
        let gamma = density_matrix(&point.small, &state, 1, 1)?.matrix;
        let mut grad = self.h * phi * &gamma;
        if self.n >= 2 && !self.w_tensor.is_empty() {
            let (d, r) = (phi.nrows(), phi.ncols());
            let e2 = tensor_embedding(&point.small, 2)?;
            let g2 = &e2 * density_matrix(&point.small, &state, 2, 2)?.matrix * e2.adjoint();
            let p = phi.kronecker(phi) * g2;
            let mut m = CMat::zeros(d * d, r * r);
            for &(i, j, k, l, v) in &self.w_tensor {
                let src = p.row(k * d + l) * v;
                let mut dst = m.row_mut(i * d + j);
                dst += src;
            }
            for a in 0..d {
                for i in 0..r {
                    let mut acc = c(0.0);
                    for b in 0..d {
                        for j in 0..r {
                            acc += m[(a * d + b, i * r + j)] * phi[(b, j)].conj();
                        }
                    }
                    grad[(a, i)] += acc * c(2.0);
                }
            }
        }
        Ok(grad * c(2.0))
    }
}

fn lowest_orbitals(h: &CMat, r: usize) -> CMat {
    let (_, vecs) = eigh(h);
    vecs.columns(0, r).into_owned()
}

fn descend(prob: &Problem, start: CMat, opts: &FiniteRankOptions) -> Result<FiniteRankResult> {
    let r = start.ncols();
    let mut phi = orthonormalize_columns(&start).ok_or_else(|| Error::InvalidInput("initial orbitals are rank deficient".into()))?;
    let mut point = prob.ci(&phi)?;
    let mut step = 0.5;
    let mut gnorm = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut previous: Option<(CMat, CMat)> = None;
    for it in 0..opts.max_iterations {
        iterations = it;
        let grad = prob.gradient(&phi, &point)?;
        let xi = &grad - &phi * (phi.adjoint() * &grad);
        gnorm = xi.norm();
        if gnorm <= opts.gradient_tolerance || r == phi.nrows() {
            converged = true;
            break;
        }
        // Barzilai-Borwein trial step, safeguarded by Armijo backtracking.
        if let Some((phi_old, xi_old)) = &previous {
            let s = &phi - phi_old;
            let y = &xi - xi_old;
            let sy = (s.adjoint() * &y).trace().re;
            if sy > 0.0 {
                step = (s.norm_squared() / sy).clamp(1e-6, 1e3);
            }
        }
        let slope = gnorm * gnorm;
        let mut accepted = None;
        for _ in 0..60 {
            if let Some(trial) = orthonormalize_columns(&(&phi - &xi * c(step))) {
                let tp = prob.ci(&trial)?;
                if tp.energy <= point.energy - 1e-4 * step * slope {
                    accepted = Some((trial, tp));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((p, tp)) => {
                previous = Some((std::mem::replace(&mut phi, p), xi));
                point = tp;
            }
            None => break,
        }
    }
    Ok(FiniteRankResult {
        n: prob.n,
        r,
        energy: point.energy,
        orbitals: phi,
        coefficients: point.coefficients,
        converged,
        iterations,
        gradient_norm: gnorm,
        restart_energies: Vec::new(),
    })
}

/// `E_r(N)`: minimum over `N`-body states whose one-body density matrix has rank `≤ r`.
pub fn finite_rank_minimize(
    h: &OneBodyOperator,
    w: &TwoBodyKernel,
    n: usize,
    r: usize,
    opts: &FiniteRankOptions,
) -> Result<FiniteRankResult> {
    let d = h.dim();
    let stats = w.statistics();
    if r == 0 || r > d {
        return invalid(format!("rank {r} must lie in 1..={d}"));
    }
    if stats == Statistics::Fermion && n > r {
        return invalid(format!("fermionic rank {r} below particle number {n}"));
    }
    if n == 0 {
        return invalid("finite-rank minimization needs at least one particle");
    }
    let prob = Problem::new(h, w, n)?;
    let starts: Vec<CMat> = (0..opts.restarts.max(1))
        .map(|k| match (k, &opts.initial) {
            (0, Some(init)) => init.clone(),
            (0, None) => lowest_orbitals(h.matrix(), r),
            _ => random::frame(&mut random::rng(opts.seed.wrapping_add(k as u64)), d, r),
        })
        .collect();
    if starts[0].shape() != (d, r) {
        return Err(Error::DimensionMismatch { expected: d * r, found: starts[0].len() });
    }
    let runs: Vec<FiniteRankResult> = starts.into_par_iter().map(|s| descend(&prob, s, opts)).collect::<Result<_>>()?;
    let restart_energies: Vec<f64> = runs.iter().map(|x| x.energy).collect();
    let mut best = runs.into_iter().min_by(|a, b| a.energy.total_cmp(&b.energy)).unwrap();
    best.restart_energies = restart_energies;
    Ok(best)
}

/// `E_r(N)` for increasing ranks with warm starts, so that the energies are
/// nonincreasing in `r` by construction.
pub fn finite_rank_chain(
    h: &OneBodyOperator,
    w: &TwoBodyKernel,
    n: usize,
    ranks: &[usize],
    opts: &FiniteRankOptions,
) -> Result<Vec<FiniteRankResult>> {
    let mut out: Vec<FiniteRankResult> = Vec::new();
    for &r in ranks {
        let mut o = opts.clone();
        if let Some(prev) = out.last() {
            let extra = lowest_orbitals(h.matrix(), h.dim());
            let mut cols: Vec<CVec> = prev.orbitals.column_iter().map(|c| c.into_owned()).collect();
            for v in extra.column_iter() {
                if cols.len() == r {
                    break;
                }
                if let Some(u) = crate::linalg::gram_schmidt_against(&v.into_owned(), &cols) {
                    cols.push(u);
                }
            }
            o.initial = Some(CMat::from_fn(h.dim(), cols.len(), |a, b| cols[b][a]));
        }
        out.push(finite_rank_minimize(h, w, n, r, &o)?);
    }
    Ok(out)
}

/// Hartree-Fock energy `tr(hγ) + ½ Σ V_ijkl (γ_ki γ_lj − γ_li γ_kj)` of a projector `γ`.
pub fn hf_energy(h: &OneBodyOperator, w: &TwoBodyKernel, gamma: &CMat) -> f64 {
    let mut e = (h.matrix() * gamma).trace();
    let mut e2 = c(0.0);
    for &(i, j, k, l, v) in w.entries() {
        e2 += v * (gamma[(k, i)] * gamma[(l, j)] - gamma[(l, i)] * gamma[(k, j)]);
    }
    e += e2 * c(0.5);
    e.re
}

/// Mean-field operator `F_ik = h_ik + Σ_jl (V_ijkl − V_ijlk) γ_lj`.
pub fn fock_operator(h: &OneBodyOperator, w: &TwoBodyKernel, gamma: &CMat) -> CMat {
    let mut f = h.matrix().clone();
    for &(i, j, k, l, v) in w.entries() {
        f[(i, k)] += v * gamma[(l, j)];
        f[(i, l)] -= v * gamma[(k, j)];
    }
    hermitian_part(&f)
}

#[derive(Debug, Clone)]
pub struct ScfOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for ScfOptions {
    fn default() -> Self {
        Self { max_iterations: 2_000, tolerance: 1e-10 }
    }
}

/// Self-consistent field iteration on the one-body density matrix with
/// density mixing; the mixing weight is halved whenever the commutator
/// residual stops decreasing.
pub fn hartree_fock_scf(h: &OneBodyOperator, w: &TwoBodyKernel, n: usize, opts: &ScfOptions) -> Result<FiniteRankResult> {
    if w.statistics() != Statistics::Fermion {
        return Err(Error::StatisticsMismatch("Hartree-Fock SCF is fermionic".into()));
    }
    let d = h.dim();
    if n == 0 || n > d {
        return invalid(format!("particle number {n} must lie in 1..={d}"));
    }
    let aufbau = |f: &CMat| {
        let phi = lowest_orbitals(f, n);
        let gamma = &phi * phi.adjoint();
        (phi, gamma)
    };
    let (mut phi, mut gamma) = aufbau(h.matrix());
    let mut theta = 1.0;
    let mut best_change = f64::INFINITY;
    let mut stalled = 0;
    let mut converged = false;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let f = fock_operator(h, w, &gamma);
        let (p_out, g_out) = aufbau(&f);
        change = (&g_out - &gamma).norm();
        phi = p_out;
        if change <= opts.tolerance {
            converged = true;
            break;
        }
        if change < best_change * 0.999 {
            best_change = change;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 && theta > 1.0 / 64.0 {
                theta *= 0.5;
                stalled = 0;
            }
        }
        gamma = &gamma * c(1.0 - theta) + g_out * c(theta);
    }
    let gamma = &phi * phi.adjoint();
    let energy = hf_energy(h, w, &gamma);
    let grad_residual = {
        let f = fock_operator(h, w, &gamma);
        (&f * &gamma - &gamma * &f).norm()
    };
    Ok(FiniteRankResult {
        n,
        r: n,
        energy,
        orbitals: phi,
        coefficients: CVec::from_element(1, c(1.0)),
        converged: converged && change <= opts.tolerance,
        iterations,
        gradient_norm: grad_residual,
        restart_energies: vec![energy],
    })
}

/// Lowest Hartree-Fock energy over `samples` random orthonormal frames.
pub fn random_slater_minimum(h: &OneBodyOperator, w: &TwoBodyKernel, n: usize, samples: usize, seed: u64) -> f64 {
    (0..samples)
        .into_par_iter()
        .map(|k| {
            let phi = random::frame(&mut random::rng(seed.wrapping_add(k as u64)), h.dim(), n);
            hf_energy(h, w, &(&phi * phi.adjoint()))
        })
        .reduce(|| f64::INFINITY, f64::min)
}
