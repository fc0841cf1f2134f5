//! Geometric localization of a two-body state to half a lattice.

use truncfock::fock::{product_state, FockBasis, Statistics};
use truncfock::linalg::c;
use truncfock::localization::{localize_via_doubling, localize_via_formula, trace_complementarity_check};
use truncfock::onebody::{window_localizer, OneBodySpace};
use truncfock::sequences::bump;
use truncfock::states::MixedState;

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 6, 6.0)?;
    let basis = FockBasis::new(6, 2, Statistics::Fermion)?;
    let left = bump(&space, &[-1.0], 2.0)?;
    let right = bump(&space, &[0.5], 2.0)?;
    let psi = product_state(&basis, &[left, right])?;
    let gamma = MixedState::nbody(&basis, 2, &(&psi / c(psi.norm())))?;

    let positions = space.positions()?;
    let chi: Vec<f64> = positions.iter().map(|x| if x[0] < 0.0 { 1.0 } else { 0.0 }).collect();
    let loc = window_localizer(&space, &chi)?;
    let local = localize_via_formula(&basis, &gamma, &loc)?;
    let outside = localize_via_formula(&basis, &gamma, &loc.complement_localizer())?;
    println!("left half: sector weights {:?}", local.sector_weights().iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>());
    println!("right half: sector weights {:?}", outside.sector_weights().iter().map(|w| format!("{w:.4}")).collect::<Vec<_>>());
    println!("trace complementarity residual {:.2e}", trace_complementarity_check(&basis, &gamma, 2, &loc)?);
    let oracle = localize_via_doubling(&basis, &gamma, &loc)?;
    println!("formula vs doubled-space partial trace {:.2e}", local.max_block_deviation(&oracle));
    Ok(())
}
