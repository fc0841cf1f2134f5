//! Identity battery over all modules, with one row per identity.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::fock::{car_ccr_residual, lift_isometry, product_state, FockBasis, Statistics};
use crate::linalg::{binomial, c, trace};
use crate::localization::{
    composition_check, finite_rank_localization_structure, localize_via_doubling, localize_via_formula,
    trace_complementarity_check,
};
use crate::onebody::{
    ims_identity_residual, ims_partition, kinetic_operator, LocalizationOperator, OneBodyOperator, OneBodySpace, TwoBodyKernel,
    WindowProfile,
};
use crate::random::{self, SeededRng};
use crate::solvers::exact::ground_state;
use crate::solvers::finite_rank::{finite_rank_chain, hartree_fock_scf, FiniteRankOptions, ScfOptions};
use crate::solvers::pekar::{pekar_minimize, PekarOptions, PekarProblem};
use crate::states::{blocks_from_density_matrices, density_matrix, density_matrix_table, random_nbody, random_state, MixedState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub identity: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> Vec<&CheckRow> {
        self.rows.iter().filter(|r| !r.passed).collect()
    }

    pub fn write_table(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{:<28} {:>6} {:>12} {:>10} {:>8}  status", "identity", "cases", "max_residual", "tolerance", "seconds")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:<28} {:>6} {:>12.3e} {:>10.1e} {:>8.2}  {}",
                r.identity,
                r.cases,
                r.max_residual,
                r.tolerance,
                r.seconds,
                if r.passed { "pass" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

fn localizer(rng: &mut SeededRng, r: usize) -> LocalizationOperator {
    let scale = random::uniform(rng, 0.3, 1.0);
    LocalizationOperator::new(random::contraction(rng, r, scale)).expect("scaled contraction")
}

fn stats_of(i: usize) -> Statistics {
    if i % 2 == 0 {
        Statistics::Fermion
    } else {
        Statistics::Boson
    }
}

struct Battery {
    rows: Vec<CheckRow>,
    seed: u64,
}

impl Battery {
    fn run(&mut self, name: &str, tolerance: f64, salt: u64, body: impl FnOnce(&mut SeededRng) -> Result<(usize, f64)>) -> Result<()> {
        let start = Instant::now();
        let mut rng = random::rng(self.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let (cases, max_residual) = body(&mut rng)?;
        self.rows.push(CheckRow {
            identity: name.into(),
            cases,
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(())
    }
}

/// CAR/CCR, density-matrix roundtrip, trace law, localization (formula
/// validity, complementarity, composition, Hartree weights, rank structure,
/// and the doubling oracle at `Full`), IMS, variational chain, SCF residual.
pub fn verify_suite(level: Level, seed: u64) -> Result<VerifyReport> {
    let full = level == Level::Full;
    let scale = |quick: usize, all: usize| if full { all } else { quick };
    let mut b = Battery { rows: Vec::new(), seed };

    b.run("car", 1e-12, 1, |rng| {
        let basis = FockBasis::new(6, 3, Statistics::Fermion)?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let (f, g) = (random::gaussian_vector(rng, 6), random::gaussian_vector(rng, 6));
            worst = worst.max(car_ccr_residual(&basis, &(&f / c(f.norm())), &(&g / c(g.norm())))?);
        }
        Ok((50, worst))
    })?;
    b.run("ccr", 1e-12, 2, |rng| {
        let basis = FockBasis::new(3, 6, Statistics::Boson)?;
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let (f, g) = (random::unit_vector(rng, 3), random::unit_vector(rng, 3));
            worst = worst.max(car_ccr_residual(&basis, &f, &g)?);
        }
        Ok((50, worst))
    })?;
    b.run("density_matrix_roundtrip", 1e-10, 3, |rng| {
        let sizes = [(2, 2), (3, 3), (4, 2), (5, 3), (5, 2)];
        let cases = scale(40, 200);
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let (r, n) = sizes[i % sizes.len()];
            let basis = FockBasis::new(r, n, stats_of(i / sizes.len()))?;
            let s = random_state(rng, &basis, 1 + i % 4);
            let back = blocks_from_density_matrices(&basis, &density_matrix_table(&basis, &s)?)?;
            worst = worst.max(back.max_block_deviation(&s));
        }
        Ok((cases, worst))
    })?;
    b.run("nbody_trace_law", 1e-10, 4, |rng| {
        let mut worst: f64 = 0.0;
        let mut cases = 0;
        for n in 1..=4 {
            for stats in [Statistics::Fermion, Statistics::Boson] {
                let basis = FockBasis::new(5, n, stats)?;
                let s = MixedState::nbody(&basis, n, &random_nbody(rng, &basis, n))?;
                for p in 0..=n {
                    let tr = trace(&density_matrix(&basis, &s, p, p)?.matrix).re;
                    worst = worst.max((tr - binomial(n, p)).abs());
                }
                cases += 1;
            }
        }
        Ok((cases, worst))
    })?;
    b.run("localized_state_valid", 1e-10, 5, |rng| {
        let cases = scale(30, 100);
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let (r, n) = [(2, 2), (3, 2), (4, 3), (3, 3)][i % 4];
            let basis = FockBasis::new(r, n, stats_of(i))?;
            let s = random_state(rng, &basis, 2);
            let out = localize_via_formula(&basis, &s, &localizer(rng, r))?;
            worst = worst.max((out.trace() - 1.0).abs()).max(-out.min_eigenvalue()).max(out.hermiticity_deviation());
        }
        Ok((cases, worst))
    })?;
    if full {
        b.run("doubling_oracle", 1e-9, 6, |rng| {
            let mut worst: f64 = 0.0;
            for i in 0..100 {
                let (r, n) = [(2, 2), (3, 2), (4, 2), (3, 3), (4, 3)][i % 5];
                let basis = FockBasis::new(r, n, stats_of(i / 5))?;
                let s = random_state(rng, &basis, 2);
                let loc = localizer(rng, r);
                let a = localize_via_formula(&basis, &s, &loc)?;
                let d = localize_via_doubling(&basis, &s, &loc)?;
                worst = worst.max(a.max_block_deviation(&d));
            }
            Ok((100, worst))
        })?;
    }
    b.run("trace_complementarity", 1e-10, 7, |rng| {
        let cases = scale(30, 100);
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let (r, n) = [(3, 2), (4, 3), (4, 2)][i % 3];
            let basis = FockBasis::new(r, n, stats_of(i))?;
            let s = MixedState::nbody(&basis, n, &random_nbody(rng, &basis, n))?;
            worst = worst.max(trace_complementarity_check(&basis, &s, n, &localizer(rng, r))?);
        }
        Ok((cases, worst))
    })?;
    b.run("composition", 1e-10, 8, |rng| {
        let cases = scale(20, 100);
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let (r, n) = [(3, 2), (4, 3)][i % 2];
            let basis = FockBasis::new(r, n, stats_of(i))?;
            let s = random_state(rng, &basis, 2);
            let (b1, b2) = (localizer(rng, r), localizer(rng, r));
            worst = worst.max(composition_check(&basis, &s, &b1, &b2)?);
        }
        Ok((cases, worst))
    })?;
    b.run("hartree_binomial_weights", 1e-10, 9, |rng| {
        let mut worst: f64 = 0.0;
        for n in 1..=4 {
            let basis = FockBasis::new(3, n, Statistics::Boson)?;
            let phi = random::unit_vector(rng, 3);
            let psi = product_state(&basis, &vec![phi.clone(); n])?;
            let psi = &psi / c(psi.norm());
            let loc = localizer(rng, 3);
            let out = localize_via_formula(&basis, &MixedState::nbody(&basis, n, &psi)?, &loc)?;
            let x = (loc.b() * &phi).norm_squared();
            for (k, wk) in out.sector_weights().iter().enumerate() {
                let expect = binomial(n, k) * (1.0 - x).powi((n - k) as i32) * x.powi(k as i32);
                worst = worst.max((wk - expect).abs());
            }
        }
        Ok((4, worst))
    })?;
    b.run("localized_rank_structure", 0.0, 10, |rng| {
        let cases = scale(20, 50);
        let mut violations = 0.0;
        for i in 0..cases {
            let (r, rank, n) = [(5, 4, 2), (5, 4, 3), (6, 4, 2), (6, 5, 3)][i % 4];
            let basis = FockBasis::new(r, n, Statistics::Fermion)?;
            let small = FockBasis::new(rank, n, Statistics::Fermion)?;
            let frame = random::frame(rng, r, rank);
            let psi = lift_isometry(&basis, &small, &frame, n)? * random_nbody(rng, &small, n);
            let cert = finite_rank_localization_structure(&basis, n, &psi, &localizer(rng, r))?;
            if !cert.holds() {
                violations += 1.0;
            }
        }
        Ok((cases, violations))
    })?;
    b.run("ims_identity", 1e-10, 11, |rng| {
        let cases = scale(30, 100);
        let mut worst: f64 = 0.0;
        for i in 0..cases {
            let sites = 6 + i % 10;
            let space = OneBodySpace::lattice(1, sites, sites as f64)?;
            let a = OneBodyOperator::new(random::hermitian(rng, sites), "random")?;
            let radius = random::uniform(rng, 0.5, 0.45 * sites as f64);
            let profile = if i % 2 == 0 { WindowProfile::Smooth } else { WindowProfile::Sharp };
            let (chi, eta) = ims_partition(&space, radius, profile)?;
            worst = worst.max(ims_identity_residual(&a, &chi, &eta)?);
        }
        Ok((cases, worst))
    })?;
    // Residuals are violations divided by their own tolerance.
    b.run("variational_chain_scaled", 1.0, 12, |_| {
        let space = OneBodySpace::lattice(1, 6, 6.0)?;
        let h = kinetic_operator(&space)?;
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 2.0, 1.0)?;
        let mut worst: f64 = 0.0;
        let ns: &[usize] = if full { &[2, 3] } else { &[2] };
        for &n in ns {
            let basis = FockBasis::new(6, n, Statistics::Fermion)?;
            let exact = ground_state(&basis, &h, &w, n)?.energy;
            let hf = hartree_fock_scf(&h, &w, n, &ScfOptions::default())?;
            let ranks: Vec<usize> = (n..=6).collect();
            let opts = FiniteRankOptions { restarts: scale(2, 8), ..Default::default() };
            let chain = finite_rank_chain(&h, &w, n, &ranks, &opts)?;
            worst = worst.max((exact - hf.energy) / 1e-9);
            worst = worst.max((hf.energy - chain[0].energy) / 1e-9);
            worst = worst.max((chain[0].energy - hf.energy) / 1e-7);
            for pair in chain.windows(2) {
                worst = worst.max((pair[1].energy - pair[0].energy) / 1e-9);
            }
            worst = worst.max((chain.last().unwrap().energy - exact).abs() / 1e-7);
        }
        Ok((ns.len(), worst))
    })?;
    b.run("pekar_scf_residual", 1e-7, 13, |_| {
        let space = OneBodySpace::lattice(1, scale(8, 12), 8.0)?;
        let mut worst: f64 = 0.0;
        let runs: &[(usize, f64)] = if full { &[(1, 2.0), (2, 1.5)] } else { &[(1, 2.0)] };
        for &(n, alpha) in runs {
            let p = PekarProblem::new(&space, Statistics::Fermion, n, alpha, 1.0, None)?;
            let res = pekar_minimize(&p, &PekarOptions::default())?;
            worst = worst.max(if res.converged { res.scf_residual } else { f64::INFINITY });
        }
        Ok((runs.len(), worst))
    })?;
    Ok(VerifyReport { level, seed, rows: b.rows })
}
