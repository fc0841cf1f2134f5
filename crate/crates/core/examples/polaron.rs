//! A single polaron: SCF minimizer, residual of the nonlinear eigenvalue
//! equation, and the kinetic-energy bound on its density.

use truncfock::fock::{FockBasis, Statistics};
use truncfock::onebody::OneBodySpace;
use truncfock::solvers::{hoffmann_ostenhof_check, pekar_minimize, PekarOptions, PekarProblem};
use truncfock::states::MixedState;

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 16, 16.0)?;
    let problem = PekarProblem::new(&space, Statistics::Fermion, 1, 3.0, 1.0, None)?;
    let res = pekar_minimize(&problem, &PekarOptions::default())?;
    println!("energy {:.10}  mu {:.10}  residual {:.1e}  iterations {}", res.energy, res.mu, res.scf_residual, res.iterations);
    let rho: Vec<String> = res.occupations.iter().map(|x| format!("{x:.3}")).collect();
    println!("occupations [{}]", rho.join(" "));
    let basis = FockBasis::new(16, 1, Statistics::Fermion)?;
    let state = MixedState::nbody(&basis, 1, &res.wavefunction)?;
    println!("kinetic minus density bound {:.2e}", hoffmann_ostenhof_check(&basis, &state, &space)?);
    Ok(())
}
