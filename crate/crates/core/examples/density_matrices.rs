//! Density matrices of a random mixed state, the inverse map, and the
//! natural orbitals of an N-body state.

use truncfock::fock::{FockBasis, Statistics};
use truncfock::linalg::{binomial, trace};
use truncfock::random;
use truncfock::states::{
    blocks_from_density_matrices, density_matrix, density_matrix_table, lowdin_support, natural_orbitals, random_nbody, random_state,
    MixedState,
};

fn main() -> truncfock::Result<()> {
    let mut rng = random::rng(3);
    let basis = FockBasis::new(4, 3, Statistics::Fermion)?;
    let gamma = random_state(&mut rng, &basis, 3);
    let table = density_matrix_table(&basis, &gamma)?;
    let back = blocks_from_density_matrices(&basis, &table)?;
    println!("roundtrip through all (p,q) density matrices: {:.2e}", back.max_block_deviation(&gamma));

    let psi = random_nbody(&mut rng, &basis, 3);
    let pure = MixedState::nbody(&basis, 3, &psi)?;
    for p in 0..=3 {
        let tr = trace(&density_matrix(&basis, &pure, p, p)?.matrix).re;
        println!("tr [G]^({p}) = {tr:.12}  (C(3,{p}) = {})", binomial(3, p));
    }
    let (occ, _) = natural_orbitals(&basis, &pure)?;
    println!("natural occupations {:?}", occ.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>());
    let support = lowdin_support(&basis, &pure, 1e-10)?;
    println!("Lowdin rank {} (localizing onto it changes the state by {:.2e})", support.rank, support.localization_deviation);
    Ok(())
}
