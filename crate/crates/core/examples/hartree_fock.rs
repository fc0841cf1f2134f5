//! Exact, Hartree-Fock and finite-rank energies on a repulsive chain.

use truncfock::fock::{FockBasis, Statistics};
use truncfock::onebody::{kinetic_operator, OneBodySpace, TwoBodyKernel};
use truncfock::solvers::{exact::ground_state, finite_rank_chain, hartree_fock_scf, FiniteRankOptions, ScfOptions};

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 6, 6.0)?;
    let h = kinetic_operator(&space)?;
    let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 2.0, 1.0)?;
    let n = 2;
    let exact = ground_state(&FockBasis::new(6, n, Statistics::Fermion)?, &h, &w, n)?;
    let hf = hartree_fock_scf(&h, &w, n, &ScfOptions::default())?;
    println!("exact        {:.10}", exact.energy);
    println!("Hartree-Fock {:.10}  ({} iterations, commutator {:.1e})", hf.energy, hf.iterations, hf.gradient_norm);
    let ranks: Vec<usize> = (n..=6).collect();
    for res in finite_rank_chain(&h, &w, n, &ranks, &FiniteRankOptions::default())? {
        println!("rank {}       {:.10}  converged {}", res.r, res.energy, res.converged);
    }
    Ok(())
}
