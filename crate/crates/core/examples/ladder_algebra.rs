//! Ladder operators on truncated Fock spaces and their (anti)commutators.

use truncfock::fock::{annihilation, car_ccr_residual, creation, number_operator, FockBasis, Statistics};
use truncfock::linalg::c;
use truncfock::random;

fn main() -> truncfock::Result<()> {
    let mut rng = random::rng(1);
    let f = random::unit_vector(&mut rng, 4);
    let g = random::unit_vector(&mut rng, 4);

    let fermions = FockBasis::new(4, 3, Statistics::Fermion)?;
    println!("fermions on 4 modes, N <= 3: dim {} sectors {:?}", fermions.dim(), fermions.sector_dims());
    println!("  CAR residual {:.2e}", car_ccr_residual(&fermions, &f, &g)?);

    let bosons = FockBasis::new(4, 3, Statistics::Boson)?;
    println!("bosons on 4 modes, N <= 3: dim {} sectors {:?}", bosons.dim(), bosons.sector_dims());
    println!("  CCR residual below the top sector {:.2e}", car_ccr_residual(&bosons, &f, &g)?);

    // a†(f) a(f) summed over an orthonormal basis is the number operator.
    let mut sum = number_operator(&bosons).scaled(c(0.0));
    for i in 0..4 {
        let e = truncfock::linalg::CVec::from_fn(4, |k, _| c(if k == i { 1.0 } else { 0.0 }));
        sum = sum.plus(&creation(&bosons, &e)?.compose(&annihilation(&bosons, &e)?));
    }
    let diff = sum.matrix().max_abs_diff(number_operator(&bosons).matrix());
    println!("  sum_i a*_i a_i vs number operator: {diff:.2e}");
    Ok(())
}
