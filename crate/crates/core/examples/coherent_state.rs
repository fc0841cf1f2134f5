//! Weyl coherent states on a bosonic truncation and the discarded Poisson tail.

use truncfock::fock::{coherent_series, coherent_tail, weyl_coherent_state, FockBasis, Statistics};
use truncfock::linalg::c;
use truncfock::random;
use truncfock::states::{average_particle_number, MixedState};

fn main() -> truncfock::Result<()> {
    let f = random::unit_vector(&mut random::rng(2), 2) * c(0.8);
    for n_max in [4, 8, 12] {
        let basis = FockBasis::new(2, n_max, Statistics::Boson)?;
        println!("N <= {n_max:>2}: Poisson tail {:.2e}", coherent_tail(f.norm_squared(), n_max));
        match weyl_coherent_state(&basis, &f, 1e-6) {
            Ok((psi, _)) => {
                let series = coherent_series(&basis, &f)?;
                let overlap = series.dotc(&psi).norm();
                let mean = average_particle_number(&basis, &MixedState::pure(&basis, &psi)?)?;
                println!("  |<series, exp>| = {overlap:.12}, <N> = {mean:.6} (untruncated {:.6})", f.norm_squared());
            }
            Err(e) => println!("  refused: {e}"),
        }
    }
    Ok(())
}
