//! IMS partition of the lattice Laplacian into inside and outside pieces.

use truncfock::onebody::{ims_identity_residual, ims_partition, kinetic_operator, OneBodySpace, WindowProfile};

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 24, 24.0)?;
    let t = kinetic_operator(&space)?;
    for profile in [WindowProfile::Smooth, WindowProfile::Sharp] {
        for radius in [3.0, 6.0, 9.0] {
            let (chi, eta) = ims_partition(&space, radius, profile)?;
            println!("{profile:?} window R = {radius}: identity residual {:.2e}", ims_identity_residual(&t, &chi, &eta)?);
        }
    }
    Ok(())
}
