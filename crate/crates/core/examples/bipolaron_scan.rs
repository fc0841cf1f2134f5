//! Binding energy of two polarons along a coupling grid on a short chain.

use truncfock::fock::Statistics;
use truncfock::onebody::OneBodySpace;
use truncfock::solvers::{binding_scan, PekarOptions};

fn main() -> truncfock::Result<()> {
    let space = OneBodySpace::lattice(1, 10, 10.0)?;
    let alphas: Vec<f64> = (0..6).map(|k| 0.75 * k as f64).collect();
    let curve = binding_scan(&space, Statistics::Fermion, 2, &alphas, 1.0, None, &PekarOptions::default())?;
    for p in &curve.points {
        println!(
            "alpha {:.2}: E(1) {:+.6}  E(2) {:+.6}  B {:+.6}  residual {:.1e}",
            p.alpha, p.energies[0], p.energies[1], p.binding_energy.unwrap_or(f64::NAN), p.max_residual
        );
    }
    println!("threshold {:?}, decrease {:.1e}, concavity {:.1e}", curve.threshold, curve.monotonicity_violation, curve.convexity_violation);
    curve.write_csv(std::io::stdout())?;
    Ok(())
}
