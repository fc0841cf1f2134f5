//! Binding margins with an attractive site at the wall, for growing boxes.

use truncfock::fock::{FockBasis, Statistics};
use truncfock::onebody::{kinetic_operator, potential_operator, OneBodySpace, TwoBodyKernel};
use truncfock::solvers::hvz_table;

fn main() -> truncfock::Result<()> {
    for l in 6..=10 {
        let space = OneBodySpace::lattice(1, l, l as f64)?;
        let t = kinetic_operator(&space)?;
        let v: Vec<f64> = (0..l).map(|i| if i == 0 { -4.0 } else { 0.0 }).collect();
        let hv = t.add(&potential_operator(&space, &v)?)?;
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 4.0, 1.0)?;
        let table = hvz_table(&FockBasis::new(l, 2, Statistics::Fermion)?, &hv, &t, &w, 2, 1e-10)?;
        println!(
            "L = {l:>2}: E(1) = {:+.5}  E(2) = {:+.5}  excess {:.5}  verdicts {:?}",
            table.energies_v[1], table.energies_v[2], table.monotonicity_excess, table.verdicts
        );
    }
    Ok(())
}
