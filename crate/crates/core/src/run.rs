//! Scenario orchestration: build the model from a [`RunConfig`], run the
//! selected solver and write CSV tables plus a JSON manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use crate::config::{InteractionSpec, PotentialSpec, RunConfig, Scenario};
use crate::error::Result;
use crate::fock::FockBasis;
use crate::onebody::{
    harmonic_samples, kinetic_operator, potential_operator, soft_coulomb_samples, well_samples, Lattice, LatticeOptions,
    OneBodyOperator, OneBodySpace, TwoBodyKernel,
};
use crate::sequences::{bump, escaping_sequence, geometric_convergence_report, odd_bump, TestFamily};
use crate::solvers::exact::{ground_state, hvz_table};
use crate::solvers::finite_rank::{finite_rank_chain, hartree_fock_scf, FiniteRankOptions, ScfOptions};
use crate::solvers::pekar::{binding_scan, pekar_minimize, PekarOptions, PekarProblem};

/// Lattice, one-body Hamiltonians with and without the external potential, and the pair interaction.
pub struct Model {
    pub space: OneBodySpace,
    pub h: OneBodyOperator,
    pub h_free: OneBodyOperator,
    pub w: TwoBodyKernel,
}

pub fn build_model(cfg: &RunConfig) -> Result<Model> {
    let s = &cfg.space;
    let space = OneBodySpace::lattice_with(
        s.dim,
        s.sites,
        s.box_len,
        LatticeOptions { boundary: s.boundary, ..Default::default() },
    )?;
    let h_free = kinetic_operator(&space)?;
    let samples = match cfg.potential {
        PotentialSpec::None => None,
        PotentialSpec::Well { depth, radius } => Some(well_samples(&space, depth, radius)?),
        PotentialSpec::Harmonic { omega } => Some(harmonic_samples(&space, omega)?),
        PotentialSpec::SoftCoulomb { charge, regularization } => Some(soft_coulomb_samples(&space, charge, regularization)?),
    };
    let h = match samples {
        Some(v) => h_free.add(&potential_operator(&space, &v)?)?,
        None => h_free.clone(),
    };
    let spacing = s.box_len / s.sites as f64;
    let w = match cfg.interaction {
        InteractionSpec::None => TwoBodyKernel::zero(space.dim(), cfg.statistics),
        InteractionSpec::SoftCoulomb { strength, regularization } => {
            TwoBodyKernel::soft_coulomb(&space, cfg.statistics, strength, regularization.unwrap_or(spacing))?
        }
        InteractionSpec::Constant { value } => TwoBodyKernel::constant(&space, cfg.statistics, value)?,
    };
    Ok(Model { space, h, h_free, w })
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub producer: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub converged: bool,
    pub outputs: Vec<Artifact>,
    pub results: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    scenario: Scenario,
    seed: u64,
    config: BTreeMap<String, serde_json::Value>,
    tolerances: BTreeMap<&'static str, f64>,
    summary: &'a RunSummary,
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

struct Writer<'a> {
    dir: &'a Path,
    outputs: Vec<Artifact>,
}

impl Writer<'_> {
    fn csv(&mut self, name: &str, producer: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.outputs.push(Artifact { file: name.into(), producer: producer.into() });
        Ok(())
    }

    fn profile(&mut self, producer: &str, lattice: &Lattice, occupations: &[f64]) -> Result<()> {
        let dv = lattice.cell_volume();
        let rows: Vec<Vec<String>> = occupations
            .iter()
            .enumerate()
            .map(|(x, n)| {
                let pos = lattice.position(x).iter().map(|p| f(*p)).collect::<Vec<_>>().join(" ");
                vec![x.to_string(), pos, f(n / dv)]
            })
            .collect();
        self.csv("profile.csv", producer, &["site", "position", "rho"], &rows)
    }
}

fn geometry(space: &OneBodySpace) -> &Lattice {
    space.geometry().expect("configured spaces are lattices")
}

/// Runs the configured scenario and writes its artifacts plus `manifest.json` into `out`.
pub fn run_scenario(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    std::fs::create_dir_all(out)?;
    let model = build_model(cfg)?;
    let n = cfg.particles;
    let mut w = Writer { dir: out, outputs: Vec::new() };
    let mut results = BTreeMap::new();
    let mut converged = true;
    let rank_opts = FiniteRankOptions {
        restarts: cfg.solver.restarts,
        seed: cfg.seed,
        max_iterations: cfg.solver.max_iterations,
        gradient_tolerance: cfg.solver.gradient_tolerance,
        initial: None,
    };
    let pekar_opts = PekarOptions { damping: cfg.pekar.damping, restarts: cfg.solver.restarts.max(2), seed: cfg.seed, ..Default::default() };

    match cfg.scenario {
        Scenario::Exact => {
            let basis = FockBasis::new(model.space.dim(), n, cfg.statistics)?;
            let mut rows = vec![vec!["0".into(), f(0.0), String::new(), f(0.0), "false".into(), "convention".into()]];
            let mut top = None;
            for k in 1..=n {
                let g = ground_state(&basis, &model.h, &model.w, k)?;
                rows.push(vec![
                    k.to_string(),
                    f(g.energy),
                    g.gap.map(f).unwrap_or_default(),
                    f(g.residual),
                    g.degenerate.to_string(),
                    g.method.to_string(),
                ]);
                if k == n {
                    results.insert("energy".into(), g.energy.into());
                    top = Some(g);
                }
            }
            w.csv("energies.csv", "exact_ground_state", &["sector", "energy", "gap", "residual", "degenerate", "method"], &rows)?;
            let g = top.unwrap();
            let state = crate::states::MixedState::nbody(&basis, n, &g.ground_vector)?;
            let prof = crate::states::density_profile(&basis, &state, &model.space)?;
            w.profile("exact_ground_state", geometry(&model.space), &prof.occupations())?;
        }
        Scenario::Hf => {
            let hf = hartree_fock_scf(&model.h, &model.w, n, &ScfOptions::default())?;
            converged &= hf.converged;
            let occ: Vec<f64> = (0..model.space.dim()).map(|x| (0..n).map(|i| hf.orbitals[(x, i)].norm_sqr()).sum()).collect();
            w.csv(
                "energies.csv",
                "hartree_fock_scf",
                &["method", "n", "energy", "converged", "iterations", "commutator_residual"],
                &[vec!["hf".into(), n.to_string(), f(hf.energy), hf.converged.to_string(), hf.iterations.to_string(), f(hf.gradient_norm)]],
            )?;
            w.profile("hartree_fock_scf", geometry(&model.space), &occ)?;
            results.insert("energy".into(), hf.energy.into());
        }
        Scenario::Rank => {
            let lo = if cfg.statistics == crate::fock::Statistics::Fermion { n } else { 1 };
            let ranks: Vec<usize> = (lo..=cfg.rank.unwrap()).collect();
            let chain = finite_rank_chain(&model.h, &model.w, n, &ranks, &rank_opts)?;
            let rows: Vec<Vec<String>> = chain
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.r.to_string(),
                        f(r.energy),
                        r.converged.to_string(),
                        r.iterations.to_string(),
                        f(r.gradient_norm),
                        r.restart_energies.iter().map(|e| f(*e)).collect::<Vec<_>>().join(" "),
                    ]
                })
                .collect();
            converged &= chain.iter().all(|r| r.converged);
            w.csv(
                "energies.csv",
                "finite_rank_minimize",
                &["n", "r", "energy", "converged", "iterations", "gradient_norm", "restart_energies"],
                &rows,
            )?;
            results.insert("energies".into(), chain.iter().map(|r| r.energy).collect::<Vec<_>>().into());
        }
        Scenario::Hvz => {
            let basis = FockBasis::new(model.space.dim(), n, cfg.statistics)?;
            let table = hvz_table(&basis, &model.h, &model.h_free, &model.w, n, cfg.solver.binding_tolerance)?;
            let rows: Vec<Vec<String>> =
                (0..=n).map(|k| vec![k.to_string(), f(table.energies_v[k]), f(table.energies_free[k])]).collect();
            w.csv("energies.csv", "hvz_table", &["k", "energy_v", "energy_free"], &rows)?;
            let rows: Vec<Vec<String>> = table
                .margins
                .iter()
                .zip(&table.verdicts)
                .map(|((k, m), (_, v))| vec![k.to_string(), f(*m), serde_json::to_value(v).unwrap().as_str().unwrap().to_string()])
                .collect();
            w.csv("margins.csv", "hvz_table", &["k", "margin", "verdict"], &rows)?;
            results.insert("monotonicity_excess".into(), table.monotonicity_excess.into());
            results.insert("finite_size_caveat".into(), table.finite_size_caveat.into());
        }
        Scenario::Pekar => {
            let p = PekarProblem::new(&model.space, cfg.statistics, n, cfg.pekar.alpha, cfg.pekar.u, cfg.pekar.regularization)?;
            let res = pekar_minimize(&p, &pekar_opts)?;
            converged &= res.converged;
            w.csv(
                "energies.csv",
                "pekar_minimize",
                &["n", "alpha", "u", "energy", "mu", "scf_residual", "converged", "iterations"],
                &[vec![
                    n.to_string(),
                    f(res.alpha),
                    f(res.u),
                    f(res.energy),
                    f(res.mu),
                    f(res.scf_residual),
                    res.converged.to_string(),
                    res.iterations.to_string(),
                ]],
            )?;
            w.profile("pekar_minimize", geometry(&model.space), &res.occupations)?;
            results.insert("energy".into(), res.energy.into());
        }
        Scenario::Scan => {
            let curve = binding_scan(
                &model.space,
                cfg.statistics,
                n,
                &cfg.pekar.alphas,
                cfg.pekar.u,
                cfg.pekar.regularization,
                &pekar_opts,
            )?;
            converged &= curve.points.iter().all(|p| p.converged);
            let mut file = BufWriter::new(File::create(out.join("binding_curve.csv"))?);
            curve.write_csv(&mut file)?;
            drop(file);
            w.outputs.push(Artifact { file: "binding_curve.csv".into(), producer: "binding_scan".into() });
            let rows: Vec<Vec<String>> = curve
                .points
                .iter()
                .flat_map(|p| p.margins.iter().map(move |(k, m)| vec![f(p.alpha), k.to_string(), f(*m)]))
                .collect();
            w.csv("margins.csv", "binding_scan", &["alpha", "k", "margin"], &rows)?;
            results.insert("threshold".into(), curve.threshold.into());
            results.insert("monotonicity_violation".into(), curve.monotonicity_violation.into());
            results.insert("convexity_violation".into(), curve.convexity_violation.into());
            results.insert("continuum_reference_not_reproduced".into(), curve.continuum_reference.into());
        }
        Scenario::Escaping => {
            let e = &cfg.escaping;
            let lat = geometry(&model.space);
            let x0 = lat.position(e.center_site);
            let phi = bump(&model.space, &x0, e.width)?;
            let esc = odd_bump(&model.space, &x0, e.width)?;
            let seq = escaping_sequence(&model.space, cfg.statistics, &phi, &esc, e.indices.clone())?;
            let window: Vec<usize> = (e.window.0..=e.window.1).collect();
            let tests = TestFamily::random(model.space.dim(), cfg.statistics, &window, e.tests_per_sector, 2, cfg.seed)?;
            let report = geometric_convergence_report(&seq, &tests)?;
            let mut file = BufWriter::new(File::create(out.join("convergence.csv"))?);
            report.write_csv(&mut file)?;
            drop(file);
            let mut file = BufWriter::new(File::create(out.join("convergence.json"))?);
            report.write_json(&mut file)?;
            drop(file);
            w.outputs.push(Artifact { file: "convergence.csv".into(), producer: "geometric_convergence_report".into() });
            w.outputs.push(Artifact { file: "convergence.json".into(), producer: "geometric_convergence_report".into() });
            let rows: Vec<Vec<String>> = report.particle_numbers.iter().map(|(k, np)| vec![k.to_string(), f(*np)]).collect();
            w.csv("particle_numbers.csv", "geometric_convergence_report", &["n", "particle_number"], &rows)?;
            results.insert("max_final_deviation".into(), report.max_final_deviation().into());
            results.insert("lower_semicontinuity".into(), report.lower_semicontinuity.into());
            results.insert("final_trace_distance".into(), report.final_trace_distance.into());
        }
    }

    let summary = RunSummary { scenario: cfg.scenario, converged, outputs: w.outputs, results };
    let tolerances = BTreeMap::from([
        ("eigen_residual", crate::solvers::exact::RESIDUAL_TOLERANCE),
        ("degeneracy", crate::solvers::exact::DEGENERACY_TOLERANCE),
        ("finite_rank_gradient", cfg.solver.gradient_tolerance),
        ("binding", cfg.solver.binding_tolerance),
        ("scf_density", pekar_opts.density_tolerance),
        ("scf_residual", pekar_opts.residual_tolerance),
        ("hf_density", ScfOptions::default().tolerance),
    ]);
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario,
        seed: cfg.seed,
        config: cfg.flat_listing(),
        tolerances,
        summary: &summary,
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(out.join("manifest.json"))?), &manifest)?;
    Ok(summary)
}
