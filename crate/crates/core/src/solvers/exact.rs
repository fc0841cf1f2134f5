//! Sector ground states by dense diagonalization or Lanczos, and HVZ tables.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{sector_hamiltonian, FockBasis, FockOperator, SectorStructure};
use crate::linalg::{c, eigh, CVec, SparseMatrix};
use crate::onebody::{OneBodyOperator, TwoBodyKernel};
use crate::random;

/// Sectors up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 2_000;
/// Required eigen-residual `‖(H − E)Ψ‖`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Gaps below this are flagged as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralResult {
    pub sector: usize,
    pub energy: f64,
    #[serde(skip)]
    pub ground_vector: CVec,
    /// `E₁ − E₀`; `None` for one-dimensional sectors.
    pub gap: Option<f64>,
    pub residual: f64,
    pub degenerate: bool,
    pub method: &'static str,
}

/// Lowest eigenpair of the sector-`n` block of a number-conserving operator.
pub fn exact_ground_state(hamiltonian: &FockOperator, basis: &FockBasis, n: usize) -> Result<SpectralResult> {
    if hamiltonian.structure() != SectorStructure::NumberConserving {
        return invalid("exact_ground_state needs a number-conserving Hamiltonian");
    }
    basis.check_sector(n)?;
    if hamiltonian.dim() != basis.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: hamiltonian.dim() });
    }
    sector_ground_state(&hamiltonian.sector_sparse(basis, n), n)
}

/// Ground state of `H(n)` assembled directly from `h` and `W`.
pub fn ground_state(basis: &FockBasis, h: &OneBodyOperator, w: &TwoBodyKernel, n: usize) -> Result<SpectralResult> {
    sector_ground_state(&sector_hamiltonian(basis, h, w, n)?, n)
}

/// Lowest eigenpair of a Hermitian sector matrix.
pub fn sector_ground_state(h: &SparseMatrix, sector: usize) -> Result<SpectralResult> {
    let dim = h.nrows();
    if dim == 0 {
        return invalid(format!("sector {sector} is empty"));
    }
    if dim <= DENSE_LIMIT {
        let (vals, vecs) = eigh(&h.to_dense());
        let v = vecs.column(0).into_owned();
        let residual = (h.matvec(&v) - &v * c(vals[0])).norm();
        let gap = vals.get(1).map(|e1| e1 - vals[0]);
        return Ok(SpectralResult {
            sector,
            energy: vals[0],
            ground_vector: v,
            gap,
            residual,
            degenerate: gap.is_some_and(|g| g < DEGENERACY_TOLERANCE),
            method: "dense",
        });
    }
    let (e0, v0, res) = lanczos_lowest(h, &[], 0x5eed ^ sector as u64)?;
    let (e1, _, _) = lanczos_lowest(h, std::slice::from_ref(&v0), 0xfeed ^ sector as u64)?;
    Ok(SpectralResult {
        sector,
        energy: e0,
        ground_vector: v0,
        gap: Some(e1 - e0),
        residual: res,
        degenerate: e1 - e0 < DEGENERACY_TOLERANCE,
        method: "lanczos",
    })
}

/// Restarted Lanczos with full reorthogonalization for the lowest eigenpair
/// of `h` on the orthogonal complement of `deflate`.
pub fn lanczos_lowest(h: &SparseMatrix, deflate: &[CVec], seed: u64) -> Result<(f64, CVec, f64)> {
    let dim = h.nrows();
    let krylov = dim.min(120);
    // Deflated directions are pushed above the spectrum instead of projected
    // out, so roundoff cannot produce spurious Ritz values.
    let bound = (0..dim).map(|i| h.row(i).iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
    let shift = 2.0 * bound + 1.0;
    let apply = |x: &CVec| {
        let mut y = h.matvec(x);
        for d in deflate {
            y += d * (d.dotc(x) * shift);
        }
        y
    };
    let mut rng = random::rng(seed);
    let mut v = random::gaussian_vector(&mut rng, dim);
    let mut best = (f64::INFINITY, v.clone(), f64::INFINITY);
    for _restart in 0..200 {
        let norm = v.norm();
        if norm < 1e-300 {
            return invalid("Lanczos start vector vanished");
        }
        let mut basis: Vec<CVec> = vec![v / c(norm)];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..krylov {
            let mut w = apply(&basis[j]);
            let a = basis[j].dotc(&w).re;
            alpha.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let o = q.dotc(&w);
                    w -= q * o;
                }
            }
            let b = w.norm();
            if j + 1 == krylov || b < 1e-12 {
                break;
            }
            beta.push(b);
            basis.push(w / c(b));
        }
        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let k = (0..m).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let theta = eig.eigenvalues[k];
        let mut y = CVec::zeros(dim);
        for (i, q) in basis.iter().enumerate() {
            y += q * c(eig.eigenvectors[(i, k)]);
        }
        y /= c(y.norm());
        let hy = apply(&y);
        let res = (hy - &y * c(theta)).norm();
        if res < best.2 {
            best = (theta, y.clone(), res);
        }
        if res <= RESIDUAL_TOLERANCE {
            return Ok(best);
        }
        v = y;
    }
    Err(Error::NoConvergence { iterations: 200, residual: best.2 })
}

/// Verdict on a binding inequality `E^V(N) < E^V(N−k) + E^0(k)` at finite size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingVerdict {
    Binding,
    Marginal,
    Unbound,
}

#[derive(Debug, Clone, Serialize)]
pub struct HvzTable {
    pub n: usize,
    /// `E^V(k)` for `k = 0..=N`.
    pub energies_v: Vec<f64>,
    /// `E^0(k)` for `k = 0..=N`.
    pub energies_free: Vec<f64>,
    /// `(k, E^V(N) − E^V(N−k) − E^0(k))` for `k = 1..=N`.
    pub margins: Vec<(usize, f64)>,
    pub verdicts: Vec<(usize, BindingVerdict)>,
    /// `max(0, E^V(N) − E^V(N−1))`: the finite-size excess over the continuum inequality.
    pub monotonicity_excess: f64,
    /// The box is finite: verdicts are statements about this lattice only.
    pub finite_size_caveat: bool,
}

/// Sector energies with and without the external potential, margins and verdicts.
pub fn hvz_table(
    basis: &FockBasis,
    h_v: &OneBodyOperator,
    h_free: &OneBodyOperator,
    w: &TwoBodyKernel,
    n: usize,
    tolerance: f64,
) -> Result<HvzTable> {
    use rayon::prelude::*;
    basis.check_sector(n)?;
    let energies: Vec<(f64, f64)> = (0..=n)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return Ok((0.0, 0.0));
            }
            Ok((ground_state(basis, h_v, w, k)?.energy, ground_state(basis, h_free, w, k)?.energy))
        })
        .collect::<Result<_>>()?;
    let energies_v: Vec<f64> = energies.iter().map(|e| e.0).collect();
    let energies_free: Vec<f64> = energies.iter().map(|e| e.1).collect();
    let margins: Vec<(usize, f64)> =
        (1..=n).map(|k| (k, energies_v[n] - energies_v[n - k] - energies_free[k])).collect();
    let verdicts = margins
        .iter()
        .map(|&(k, m)| {
            let v = if m < -tolerance {
                BindingVerdict::Binding
            } else if m <= tolerance {
                BindingVerdict::Marginal
            } else {
                BindingVerdict::Unbound
            };
            (k, v)
        })
        .collect();
    let monotonicity_excess = if n >= 1 { (energies_v[n] - energies_v[n - 1]).max(0.0) } else { 0.0 };
    Ok(HvzTable { n, energies_v, energies_free, margins, verdicts, monotonicity_excess, finite_size_caveat: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{assemble_hamiltonian, Statistics};
    use crate::onebody::{kinetic_operator, potential_operator, well_samples, OneBodySpace};

    fn chain(n: usize) -> OneBodySpace {
        OneBodySpace::lattice(1, n, n as f64).unwrap()
    }

    #[test]
    fn vacuum_and_one_particle() {
        let space = chain(6);
        let basis = FockBasis::new(6, 3, Statistics::Fermion).unwrap();
        let h = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 1.0, 1.0).unwrap();
        let ham = assemble_hamiltonian(&basis, &h, &w).unwrap();
        assert_eq!(exact_ground_state(&ham, &basis, 0).unwrap().energy, 0.0);
        let e1 = exact_ground_state(&ham, &basis, 1).unwrap();
        assert!((e1.energy - h.eigenvalues()[0]).abs() < 1e-12);
        assert!(e1.residual <= RESIDUAL_TOLERANCE);
        let e3 = exact_ground_state(&ham, &basis, 3).unwrap();
        assert!(e3.energy >= 0.0);
    }

    #[test]
    fn free_fermions_fill_levels() {
        let space = chain(8);
        let basis = FockBasis::new(8, 3, Statistics::Fermion).unwrap();
        let h = kinetic_operator(&space).unwrap().add(&potential_operator(&space, &well_samples(&space, 1.0, 1.5).unwrap()).unwrap()).unwrap();
        let w = TwoBodyKernel::zero(8, Statistics::Fermion);
        let levels = h.eigenvalues();
        for k in 1..=3 {
            let e = ground_state(&basis, &h, &w, k).unwrap().energy;
            assert!((e - levels[..k].iter().sum::<f64>()).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let space = chain(10);
        let basis = FockBasis::new(10, 3, Statistics::Boson).unwrap();
        let h = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Boson, 1.0, 1.0).unwrap();
        let m = sector_hamiltonian(&basis, &h, &w, 3).unwrap();
        let dense = sector_ground_state(&m, 3).unwrap();
        let (e, v, res) = lanczos_lowest(&m, &[], 1).unwrap();
        assert!((e - dense.energy).abs() < 1e-9);
        assert!(res <= RESIDUAL_TOLERANCE);
        assert!((v.dotc(&dense.ground_vector).norm() - 1.0).abs() < 1e-8);
        let (e1, _, _) = lanczos_lowest(&m, std::slice::from_ref(&v), 2).unwrap();
        assert!((e1 - e - dense.gap.unwrap()).abs() < 1e-8);
    }

    #[test]
    fn degeneracy_flag() {
        let h = SparseMatrix::from_dense(&crate::linalg::CMat::identity(3, 3));
        assert!(sector_ground_state(&h, 1).unwrap().degenerate);
    }

    #[test]
    fn hvz_binding_and_free_margins() {
        let space = chain(8);
        let basis = FockBasis::new(8, 2, Statistics::Fermion).unwrap();
        let t = kinetic_operator(&space).unwrap();
        let v = potential_operator(&space, &well_samples(&space, 3.0, 1.5).unwrap()).unwrap();
        let hv = t.add(&v).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 0.5, 1.0).unwrap();
        let table = hvz_table(&basis, &hv, &t, &w, 2, 1e-10).unwrap();
        assert!(table.margins.iter().all(|&(_, m)| m < 0.0), "{table:?}");
        assert!(table.verdicts.iter().all(|&(_, v)| v == BindingVerdict::Binding));
        let free = hvz_table(&basis, &t, &t, &w, 2, 1e-10).unwrap();
        let (_, m) = free.margins[1];
        assert!(m.abs() < 1e-12);
        assert!(free.energies_v.iter().all(|&e| e >= 0.0));
    }
}
