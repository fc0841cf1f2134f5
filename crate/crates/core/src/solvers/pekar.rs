//! Pekar-Tomasevich multi-polaron on a position lattice.
//!
//! `E(Ψ) = ⟨Ψ, (T + U·W) Ψ⟩ − (α/2) Σ_{x,y} n(x) k(x−y) n(y)` with `n` the
//! site occupations of `Ψ` and `k(x) = 1/√(x² + a²)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{sector_hamiltonian, FockBasis, Statistics};
use crate::linalg::{c, CMat, CVec, SparseMatrix};
use crate::onebody::{kinetic_operator, OneBodySpace, TwoBodyKernel};
use crate::random;
use crate::solvers::exact::sector_ground_state;

/// Sector-`N` setup: kinetic energy, repulsion `U·k` and the attraction kernel.
#[derive(Debug, Clone)]
pub struct PekarProblem {
    pub space: OneBodySpace,
    pub basis: FockBasis,
    pub n: usize,
    pub alpha: f64,
    pub u: f64,
    pub regularization: f64,
    kernel: CMat,
    linear: SparseMatrix,
    /// `(configuration, site, occupation)` for every occupied site.
    occupation_table: Vec<(usize, usize, f64)>,
}

impl PekarProblem {
    /// `regularization = None` uses the lattice spacing.
    pub fn new(space: &OneBodySpace, stats: Statistics, n: usize, alpha: f64, u: f64, regularization: Option<f64>) -> Result<Self> {
        let lat = space.require_lattice()?.clone();
        if alpha < 0.0 || !alpha.is_finite() || !u.is_finite() {
            return invalid("coupling constants must be finite with alpha >= 0");
        }
        if n == 0 {
            return invalid("polaron needs at least one particle");
        }
        let a = regularization.unwrap_or(lat.spacing());
        if a <= 0.0 {
            return invalid("kernel regularization must be positive");
        }
        let r = space.dim();
        let basis = FockBasis::new(r, n, stats)?;
        let kernel = CMat::from_fn(r, r, |x, y| c(1.0 / (lat.distance(x, y).powi(2) + a * a).sqrt()));
        let t = kinetic_operator(space)?;
        let w = if u != 0.0 && n >= 2 {
            TwoBodyKernel::soft_coulomb(space, stats, u, a)?
        } else {
            TwoBodyKernel::zero(r, stats)
        };
        let linear = sector_hamiltonian(&basis, &t, &w, n)?;
        let mut occupation_table = Vec::new();
        for (idx, tuple) in basis.sector(n).iter().enumerate() {
            for (site, count) in basis.occupations(tuple).into_iter().enumerate() {
                if count > 0 {
                    occupation_table.push((idx, site, count as f64));
                }
            }
        }
        Ok(Self { space: space.clone(), basis, n, alpha, u, regularization: a, kernel, linear, occupation_table })
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn kernel(&self) -> &CMat {
        &self.kernel
    }

    pub fn sector_dim(&self) -> usize {
        self.linear.nrows()
    }

    /// Site occupations of an `N`-body vector.
    pub fn occupations(&self, psi: &CVec) -> Result<Vec<f64>> {
        if psi.len() != self.sector_dim() {
            return Err(Error::DimensionMismatch { expected: self.sector_dim(), found: psi.len() });
        }
        let mut occ = vec![0.0; self.space.dim()];
        for &(idx, site, count) in &self.occupation_table {
            occ[site] += count * psi[idx].norm_sqr();
        }
        Ok(occ)
    }

    fn self_energy(&self, occ: &[f64]) -> f64 {
        let mut s = 0.0;
        for (x, nx) in occ.iter().enumerate() {
            for (y, ny) in occ.iter().enumerate() {
                s += nx * self.kernel[(x, y)].re * ny;
            }
        }
        s
    }

    /// Linear operator plus the mean-field attraction `−α (k∗n)`.
    pub fn mean_field_hamiltonian(&self, occ: &[f64]) -> SparseMatrix {
        let r = occ.len();
        let pot: Vec<f64> = (0..r).map(|x| -self.alpha * (0..r).map(|z| self.kernel[(x, z)].re * occ[z]).sum::<f64>()).collect();
        let mut diag = vec![0.0; self.sector_dim()];
        for &(idx, site, count) in &self.occupation_table {
            diag[idx] += count * pot[site];
        }
        let d = self.sector_dim();
        self.linear.add(&SparseMatrix::from_triplets(d, d, diag.into_iter().enumerate().map(|(i, v)| (i, i, c(v)))))
    }

    /// `‖(H_Ψ − μ)Ψ‖` with `H_Ψ` built from the density of `Ψ` itself.
    pub fn scf_residual(&self, psi: &CVec, mu: f64) -> Result<f64> {
        let h = self.mean_field_hamiltonian(&self.occupations(psi)?);
        Ok((h.matvec(psi) - psi * c(mu)).norm())
    }
}

/// The Pekar-Tomasevich functional of a normalized `N`-body vector.
pub fn pekar_energy(problem: &PekarProblem, psi: &CVec) -> Result<f64> {
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    if psi.len() != problem.sector_dim() {
        return Err(Error::DimensionMismatch { expected: problem.sector_dim(), found: psi.len() });
    }
    let lin = psi.dotc(&problem.linear.matvec(psi)).re;
    let occ = problem.occupations(psi)?;
    Ok(lin - 0.5 * problem.alpha * problem.self_energy(&occ))
}

/// Energy of the mixture `tΨ₁ + (1−t)Ψ₂` minus the convex combination of the
/// two energies; nonnegative when the attraction kernel is positive-type.
pub fn mixture_concavity_gap(problem: &PekarProblem, psi1: &CVec, psi2: &CVec, t: f64) -> Result<f64> {
    let (e1, e2) = (pekar_energy(problem, psi1)?, pekar_energy(problem, psi2)?);
    let lin = |p: &CVec| p.dotc(&problem.linear.matvec(p)).re;
    let (n1, n2) = (problem.occupations(psi1)?, problem.occupations(psi2)?);
    let mix: Vec<f64> = n1.iter().zip(&n2).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let e_mix = t * lin(psi1) + (1.0 - t) * lin(psi2) - 0.5 * problem.alpha * problem.self_energy(&mix);
    Ok(e_mix - (t * e1 + (1.0 - t) * e2))
}

#[derive(Debug, Clone, Serialize)]
pub struct PolaronResult {
    pub alpha: f64,
    pub u: f64,
    pub n: usize,
    pub energy: f64,
    #[serde(skip)]
    pub wavefunction: CVec,
    pub occupations: Vec<f64>,
    pub scf_residual: f64,
    pub mu: f64,
    pub converged: bool,
    pub iterations: usize,
    pub damping: f64,
    pub restart_energies: Vec<f64>,
    /// Energies of accepted iterates (nonincreasing).
    #[serde(skip)]
    pub energy_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PekarOptions {
    pub damping: f64,
    pub max_backoff: usize,
    pub density_tolerance: f64,
    pub residual_tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Extra starting occupations (e.g. a warm start from a neighbouring α).
    pub warm_start: Option<Vec<f64>>,
}

impl Default for PekarOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_backoff: 4,
            density_tolerance: 1e-8,
            residual_tolerance: 1e-7,
            max_iterations: 5_000,
            restarts: 4,
            seed: 0,
            warm_start: None,
        }
    }
}

struct Iterate {
    occ: Vec<f64>,
    psi: CVec,
    mu: f64,
    energy: f64,
}

fn solve_at(problem: &PekarProblem, occ_in: &[f64]) -> Result<Iterate> {
    let g = sector_ground_state(&problem.mean_field_hamiltonian(occ_in), problem.n)?;
    let occ = problem.occupations(&g.ground_vector)?;
    let energy = pekar_energy(problem, &g.ground_vector)?;
    Ok(Iterate { occ, psi: g.ground_vector, mu: g.energy, energy })
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Damped fixed-point iteration from one starting density.
fn scf_from(problem: &PekarProblem, start: Vec<f64>, opts: &PekarOptions) -> Result<PolaronResult> {
    let mut occ_in = start;
    let mut current = solve_at(problem, &occ_in)?;
    let mut trace = vec![current.energy];
    let mut theta = opts.damping;
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        iterations = it + 1;
        let change = l1(&current.occ, &occ_in);
        if change <= opts.density_tolerance {
            residual = problem.scf_residual(&current.psi, current.mu)?;
            if residual <= opts.residual_tolerance {
                converged = true;
                break;
            }
        }
        let mut accepted = None;
        let mut t = theta;
        for _ in 0..=opts.max_backoff {
            let mixed: Vec<f64> = occ_in.iter().zip(&current.occ).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let next = solve_at(problem, &mixed)?;
            if next.energy <= current.energy + 1e-12 * current.energy.abs().max(1.0) {
                accepted = Some((mixed, next));
                break;
            }
            t *= 0.5;
        }
        // The undamped step from the density of the current iterate never
        // raises the energy (tangent bound of the concave attraction).
        let (mixed, next) = match accepted {
            Some(x) => {
                theta = t;
                x
            }
            None => {
                let occ = current.occ.clone();
                let next = solve_at(problem, &occ)?;
                if next.energy > current.energy + 1e-9 * current.energy.abs().max(1.0) {
                    return Err(Error::NoConvergence { iterations: it, residual: change });
                }
                (occ, next)
            }
        };
        occ_in = mixed;
        current = next;
        trace.push(current.energy);
    }
    Ok(PolaronResult {
        alpha: problem.alpha,
        u: problem.u,
        n: problem.n,
        energy: current.energy,
        wavefunction: current.psi,
        occupations: current.occ,
        scf_residual: residual,
        mu: current.mu,
        converged,
        iterations,
        damping: theta,
        restart_energies: Vec::new(),
        energy_trace: trace,
    })
}

/// Starting densities: uniform, concentrated at the box center, random, warm start.
fn starting_densities(problem: &PekarProblem, opts: &PekarOptions) -> Vec<Vec<f64>> {
    let r = problem.space.dim();
    let n = problem.n as f64;
    let mut out = vec![vec![n / r as f64; r]];
    let mut peaked = vec![0.0; r];
    peaked[r / 2] = n;
    out.push(peaked);
    for k in 2..opts.restarts.max(2) {
        let mut rng = random::rng(opts.seed.wrapping_add(k as u64));
        let raw: Vec<f64> = (0..r).map(|_| random::uniform(&mut rng, 0.0, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        out.push(raw.iter().map(|v| v * n / total).collect());
    }
    if let Some(w) = &opts.warm_start {
        out.push(w.clone());
    }
    out
}

/// Lowest Pekar-Tomasevich energy over several SCF runs.
pub fn pekar_minimize(problem: &PekarProblem, opts: &PekarOptions) -> Result<PolaronResult> {
    if let Some(w) = &opts.warm_start {
        if w.len() != problem.space.dim() {
            return Err(Error::DimensionMismatch { expected: problem.space.dim(), found: w.len() });
        }
    }
    let runs: Vec<PolaronResult> = starting_densities(problem, opts)
        .into_par_iter()
        .map(|s| scf_from(problem, s, opts))
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = runs.iter().map(|r| r.energy).collect();
    let mut best = runs
        .into_iter()
        .min_by(|a, b| (!a.converged).cmp(&!b.converged).then(a.energy.total_cmp(&b.energy)))
        .unwrap();
    best.restart_energies = energies;
    Ok(best)
}

/// One-particle functional minimized directly over real unit vectors by
/// projected gradient descent (an SCF-free reference).
pub fn choquard_descent(problem: &PekarProblem, starts: usize, seed: u64) -> Result<f64> {
    if problem.n != 1 {
        return invalid("the direct one-body minimization needs N = 1");
    }
    let t = kinetic_operator(&problem.space)?.matrix().map(|z| z.re);
    let k = problem.kernel.map(|z| z.re);
    let r = t.nrows();
    let energy = |phi: &nalgebra::DVector<f64>| {
        let rho = phi.component_mul(phi);
        phi.dot(&(&t * phi)) - 0.5 * problem.alpha * rho.dot(&(&k * &rho))
    };
    let step = 0.2 / (t.norm() + problem.alpha * k.norm()).max(1e-12);
    let best = (0..starts)
        .into_par_iter()
        .map(|s| {
            let mut rng = random::rng(seed.wrapping_add(s as u64));
            let mut phi = nalgebra::DVector::from_fn(r, |_, _| random::uniform(&mut rng, 0.0, 1.0));
            phi /= phi.norm();
            let mut e = energy(&phi);
            for _ in 0..50_000 {
                let rho = phi.component_mul(&phi);
                let g = (&t * &phi) * 2.0 - (&k * &rho).component_mul(&phi) * (2.0 * problem.alpha);
                let g = &g - &phi * phi.dot(&g);
                if g.norm() < 1e-10 {
                    break;
                }
                let mut next = &phi - g * step;
                next /= next.norm();
                let en = energy(&next);
                if en > e {
                    break;
                }
                phi = next;
                e = en;
            }
            e
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

/// Compares `E_{α,U}` on a lattice of spacing `h` with `U² E_{α/U,1}` on the
/// same number of sites with spacing `hU`; returns both energies.
pub fn lattice_scaling_check(
    dim: usize,
    sites: usize,
    box_len: f64,
    stats: Statistics,
    n: usize,
    alpha: f64,
    u: f64,
    opts: &PekarOptions,
) -> Result<(f64, f64)> {
    if u <= 0.0 {
        return invalid("scaling check needs U > 0");
    }
    let original = OneBodySpace::lattice(dim, sites, box_len)?;
    let scaled = OneBodySpace::lattice(dim, sites, box_len * u)?;
    let e = pekar_minimize(&PekarProblem::new(&original, stats, n, alpha, u, None)?, opts)?.energy;
    let e_scaled = pekar_minimize(&PekarProblem::new(&scaled, stats, n, alpha / u, 1.0, None)?, opts)?.energy;
    Ok((e, u * u * e_scaled))
}

#[derive(Debug, Clone, Serialize)]
pub struct BindingPoint {
    pub alpha: f64,
    /// `E_α(k)` for `k = 1..=N`.
    pub energies: Vec<f64>,
    /// `(k, E_α(N) − E_α(N−k) − E_α(k))` for `k = 1..N`.
    pub margins: Vec<(usize, f64)>,
    /// `2E_α(1) − E_α(2)` when `N = 2`.
    pub binding_energy: Option<f64>,
    pub converged: bool,
    pub max_residual: f64,
    /// `|μ − λ_min(H_ρ)|` from a fresh diagonalization at the converged density.
    pub linearization_check: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BindingCurve {
    pub n: usize,
    pub u: f64,
    pub points: Vec<BindingPoint>,
    /// First α (linear interpolation) where the binding energy turns positive.
    pub threshold: Option<f64>,
    /// Largest decrease of the binding energy between grid neighbours.
    pub monotonicity_violation: f64,
    /// Largest negative second divided difference (scaled by the grid step).
    pub convexity_violation: f64,
    pub continuum_reference: f64,
}

impl BindingCurve {
    pub fn binding_energies(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.binding_energy).collect()
    }

    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["alpha".to_string()];
        header.extend((1..=self.n).map(|k| format!("E{k}")));
        header.extend((1..self.n).map(|k| format!("margin_k{k}")));
        header.extend(["binding_energy", "converged", "max_residual"].map(String::from));
        out.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![format!("{:.16e}", p.alpha)];
            row.extend(p.energies.iter().map(|e| format!("{e:.16e}")));
            row.extend(p.margins.iter().map(|(_, m)| format!("{m:.16e}")));
            row.push(p.binding_energy.map(|b| format!("{b:.16e}")).unwrap_or_default());
            row.push(p.converged.to_string());
            row.push(format!("{:.16e}", p.max_residual));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Energies `E_α(k)`, `k ≤ N`, along an ascending α grid with warm starts.
pub fn binding_scan(
    space: &OneBodySpace,
    stats: Statistics,
    n: usize,
    alphas: &[f64],
    u: f64,
    regularization: Option<f64>,
    opts: &PekarOptions,
) -> Result<BindingCurve> {
    if alphas.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("alpha grid must be strictly ascending");
    }
    // Particle numbers are independent; α points are chained by warm starts.
    let per_k: Vec<Vec<PolaronResult>> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let base = PekarProblem::new(space, stats, k, 0.0, u, regularization)?;
            let mut warm: Option<Vec<f64>> = None;
            let mut out = Vec::new();
            for &alpha in alphas {
                // Random starts only at the first α; later points follow the warm start.
                let restarts = if warm.is_some() { opts.restarts.min(2) } else { opts.restarts };
                let o = PekarOptions { warm_start: warm.clone(), restarts, ..opts.clone() };
                let res = pekar_minimize(&base.with_alpha(alpha), &o)?;
                warm = Some(res.occupations.clone());
                out.push(res);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (i, &alpha) in alphas.iter().enumerate() {
        let energies: Vec<f64> = per_k.iter().map(|v| v[i].energy).collect();
        let e = |k: usize| if k == 0 { 0.0 } else { energies[k - 1] };
        let margins = (1..n).map(|k| (k, e(n) - e(n - k) - e(k))).collect();
        let top = &per_k[n - 1][i];
        let problem = PekarProblem::new(space, stats, n, alpha, u, regularization)?;
        let fresh = sector_ground_state(&problem.mean_field_hamiltonian(&top.occupations), n)?;
        points.push(BindingPoint {
            alpha,
            energies: energies.clone(),
            margins,
            binding_energy: (n == 2).then(|| 2.0 * energies[0] - energies[1]),
            converged: per_k.iter().all(|v| v[i].converged),
            max_residual: per_k.iter().map(|v| v[i].scf_residual).fold(0.0, f64::max),
            linearization_check: (fresh.energy - top.mu).abs(),
        });
    }
    let b: Vec<f64> = points.iter().filter_map(|p| p.binding_energy).collect();
    let threshold = b.windows(2).zip(alphas.windows(2)).find_map(|(bw, aw)| {
        (bw[0] <= 0.0 && bw[1] > 0.0).then(|| aw[0] + (aw[1] - aw[0]) * (-bw[0]) / (bw[1] - bw[0]))
    });
    let monotonicity_violation = b.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    let convexity_violation = (1..b.len().saturating_sub(1))
        .map(|i| {
            let (h0, h1) = (alphas[i] - alphas[i - 1], alphas[i + 1] - alphas[i]);
            let second = (b[i + 1] - b[i]) / h1 - (b[i] - b[i - 1]) / h0;
            (-second * 0.5 * (h0 + h1)).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(BindingCurve { n, u, points, threshold, monotonicity_violation, convexity_violation, continuum_reference: 0.87 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::exact::ground_state;

    fn line(sites: usize, len: f64) -> OneBodySpace {
        OneBodySpace::lattice(1, sites, len).unwrap()
    }

    #[test]
    fn zero_coupling_is_linear() {
        let space = line(8, 8.0);
        let p = PekarProblem::new(&space, Statistics::Fermion, 2, 0.0, 1.0, None).unwrap();
        let res = pekar_minimize(&p, &PekarOptions::default()).unwrap();
        let t = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 1.0, 1.0).unwrap();
        let exact = ground_state(&p.basis, &t, &w, 2).unwrap().energy;
        assert!((res.energy - exact).abs() < 1e-9);
        assert!((res.mu - exact).abs() < 1e-9);
    }

    #[test]
    fn one_particle_kinetic_at_zero_coupling() {
        let space = line(8, 8.0);
        let p = PekarProblem::new(&space, Statistics::Fermion, 1, 0.0, 1.0, None).unwrap();
        let res = pekar_minimize(&p, &PekarOptions::default()).unwrap();
        let e0 = kinetic_operator(&space).unwrap().eigenvalues()[0];
        assert!((res.energy - e0).abs() < 1e-10);
    }

    #[test]
    fn scf_fixed_point_and_energy() {
        let space = line(12, 12.0);
        for (n, alpha) in [(1, 2.0), (2, 1.5)] {
            let p = PekarProblem::new(&space, Statistics::Fermion, n, alpha, 1.0, None).unwrap();
            let res = pekar_minimize(&p, &PekarOptions::default()).unwrap();
            assert!(res.converged);
            assert!(res.scf_residual <= 1e-7);
            assert!((pekar_energy(&p, &res.wavefunction).unwrap() - res.energy).abs() < 1e-9);
            assert!(res.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)));
            let mass: f64 = res.occupations.iter().sum();
            assert!((mass - n as f64).abs() < 1e-10);
            assert!(res.occupations.iter().all(|&x| x >= -1e-14));
        }
    }

    #[test]
    fn one_particle_matches_direct_descent_and_localizes() {
        let space = line(16, 16.0);
        let p = PekarProblem::new(&space, Statistics::Fermion, 1, 3.0, 1.0, None).unwrap();
        let res = pekar_minimize(&p, &PekarOptions::default()).unwrap();
        let oracle = choquard_descent(&p, 8, 3).unwrap();
        assert!(res.energy <= oracle + 1e-8, "{} vs {}", res.energy, oracle);
        let e0 = kinetic_operator(&space).unwrap().eigenvalues()[0];
        assert!(res.energy < e0);
        let peak = res.occupations.iter().cloned().fold(0.0, f64::max);
        assert!(peak > 2.0 / 16.0);
    }

    #[test]
    fn scaling_identity() {
        let opts = PekarOptions::default();
        let (e, scaled) = lattice_scaling_check(1, 10, 10.0, Statistics::Fermion, 2, 1.2, 0.7, &opts).unwrap();
        assert!((e - scaled).abs() <= 1e-3 * e.abs());
    }

    #[test]
    fn mixtures_do_not_lower_the_energy() {
        let space = line(8, 8.0);
        let p = PekarProblem::new(&space, Statistics::Fermion, 2, 1.0, 1.0, None).unwrap();
        let mut rng = random::rng(9);
        for _ in 0..20 {
            let a = random::unit_vector(&mut rng, p.sector_dim());
            let b = random::unit_vector(&mut rng, p.sector_dim());
            let t = random::uniform(&mut rng, 0.0, 1.0);
            assert!(mixture_concavity_gap(&p, &a, &b, t).unwrap() >= -1e-9);
        }
    }

    #[test]
    fn no_binding_without_attraction() {
        let space = line(12, 12.0);
        let curve = binding_scan(&space, Statistics::Fermion, 2, &[0.0, 0.5], 1.0, None, &PekarOptions::default()).unwrap();
        assert!(curve.points[0].binding_energy.unwrap() <= 1e-8);
        assert!(curve.points.iter().all(|p| p.linearization_check < 1e-8));
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn occupations_match_density_matrix() {
        let space = line(6, 6.0);
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let p = PekarProblem::new(&space, stats, 3, 1.0, 1.0, None).unwrap();
            let psi = random::unit_vector(&mut random::rng(4), p.sector_dim());
            let g = crate::states::density_matrix(&p.basis, &crate::states::MixedState::nbody(&p.basis, 3, &psi).unwrap(), 1, 1)
                .unwrap()
                .matrix;
            let occ = p.occupations(&psi).unwrap();
            assert!(occ.iter().enumerate().all(|(x, o)| (o - g[(x, x)].re).abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_unnormalized() {
        let space = line(6, 6.0);
        let p = PekarProblem::new(&space, Statistics::Boson, 1, 1.0, 1.0, None).unwrap();
        assert!(matches!(pekar_energy(&p, &CVec::zeros(6)), Err(Error::NotNormalized { .. })));
    }
}
