//! One particle stays in a bump while the other runs to the wall; the
//! pairings against test vectors converge to the one-particle limit.

use truncfock::fock::Statistics;
use truncfock::onebody::OneBodySpace;
use truncfock::sequences::{bump, escaping_sequence, geometric_convergence_report, odd_bump, TestFamily};

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 64, 64.0)?;
    let x0 = space.positions()?[10].clone();
    let phi = bump(&space, &x0, 4.0)?;
    let escaping = odd_bump(&space, &x0, 4.0)?;
    let seq = escaping_sequence(&space, Statistics::Fermion, &phi, &escaping, vec![0, 4, 8, 16, 32])?;
    let tests = TestFamily::random(64, Statistics::Fermion, &(4..=16).collect::<Vec<_>>(), 3, 2, 11)?;
    let report = geometric_convergence_report(&seq, &tests)?;
    for t in &report.trends {
        println!("(p,q) = ({},{}): final deviation {:.2e}, {:?}", t.p, t.q, t.final_deviation, t.trend);
    }
    println!("particle numbers {:?}, limit {}", report.particle_numbers, report.limit_particle_number);
    println!("lower semicontinuity {}; trace distance at the end {:.3}", report.lower_semicontinuity, report.final_trace_distance);
    Ok(())
}
