//! Lattice form of the Hoffmann-Ostenhof inequality.

use crate::error::Result;
use crate::fock::FockBasis;
use crate::onebody::{kinetic_operator, OneBodySpace};
use crate::states::{density_matrix, MixedState};

/// `tr(−Δ γ) − Σ_edges (√n_{x+e} − √n_x)² / h²`, with `n` the site
/// occupations and Dirichlet walls treated as ghost sites of zero density.
/// Expected to be nonnegative.
pub fn hoffmann_ostenhof_check(basis: &FockBasis, state: &MixedState, space: &OneBodySpace) -> Result<f64> {
    let lat = space.require_lattice()?;
    basis.check_modes(space.dim())?;
    if basis.max_particles() == 0 {
        return Ok(0.0);
    }
    let gamma = density_matrix(basis, state, 1, 1)?.matrix;
    let laplacian = kinetic_operator(space)?.matrix() * crate::linalg::c(2.0);
    let kinetic = (laplacian * &gamma).trace().re;
    let root: Vec<f64> = (0..space.dim()).map(|x| gamma[(x, x)].re.max(0.0).sqrt()).collect();
    let h2 = lat.spacing().powi(2);
    let mut gradient = 0.0;
    for x in 0..space.dim() {
        for axis in 0..lat.dim {
            let fwd = lat.neighbor(x, axis, true);
            if fwd == Some(x) {
                continue;
            }
            let next = fwd.map_or(0.0, |y| root[y]);
            gradient += (next - root[x]).powi(2) / h2;
            if lat.neighbor(x, axis, false).is_none() {
                gradient += root[x].powi(2) / h2;
            }
        }
    }
    Ok(kinetic - gradient)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{product_state, Statistics};
    use crate::linalg::{c, CVec};
    use crate::sequences::bump;

    #[test]
    fn equality_for_nonnegative_orbital() {
        let space = OneBodySpace::lattice(1, 12, 12.0).unwrap();
        let basis = FockBasis::new(12, 1, Statistics::Fermion).unwrap();
        let phi = bump(&space, &[1.0], 3.0).unwrap();
        let state = MixedState::nbody(&basis, 1, &phi).unwrap();
        assert!(hoffmann_ostenhof_check(&basis, &state, &space).unwrap().abs() < 1e-12);
        let vac = MixedState::vacuum(&basis);
        assert_eq!(hoffmann_ostenhof_check(&basis, &vac, &space).unwrap(), 0.0);
    }

    #[test]
    fn positive_for_two_bumps() {
        for space in [
            OneBodySpace::lattice(1, 12, 12.0).unwrap(),
            OneBodySpace::lattice(2, 5, 5.0).unwrap(),
        ] {
            let r = space.dim();
            let basis = FockBasis::new(r, 2, Statistics::Fermion).unwrap();
            let a = CVec::from_fn(r, |i, _| c(((i * 7 % 5) as f64 - 2.0).abs() + 0.1));
            let b = CVec::from_fn(r, |i, _| c(((i * 3 % 4) as f64).sin()));
            let a = &a / c(a.norm());
            let b = &b - &a * a.dotc(&b);
            let b = &b / c(b.norm());
            let psi = product_state(&basis, &[a, b]).unwrap();
            let state = MixedState::nbody(&basis, 2, &psi).unwrap();
            assert!(hoffmann_ostenhof_check(&basis, &state, &space).unwrap() > 0.0);
        }
    }
}
