//! Worked sequences of states (escaping particles, Hartree and Hartree-Fock
//! families, free evolution), pairing-based convergence diagnostics and the
//! concentration function.
//!
//! Members are stored as [`CompressedState`]s: a state on the Fock space of a
//! small orthonormal one-body support, which keeps 64-site boxes cheap.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{lift_isometry, lift_onebody, product_state, FockBasis, Statistics};
use crate::linalg::{binomial, c, eigh, range_basis, CMat, CVec};
use crate::localization::localize_via_formula;
use crate::onebody::{kinetic_operator, Boundary, LocalizationOperator, OneBodySpace};
use crate::random;
use crate::states::{average_particle_number, density_matrix, DensityProfile, MixedState};

const SUPPORT_TOLERANCE: f64 = 1e-12;

/// A state living on `F^{≤N}(Ran Q)` for an orthonormal frame `Q` (`r × k`).
#[derive(Debug, Clone)]
pub struct CompressedState {
    support: CMat,
    small: FockBasis,
    state: MixedState,
}

impl CompressedState {
    pub fn new(support: CMat, state: MixedState) -> Result<Self> {
        let k = support.ncols();
        let dev = (support.adjoint() * &support - CMat::identity(k, k)).norm();
        if dev > 1e-10 {
            return invalid(format!("support frame is not orthonormal (deviation {dev:e})"));
        }
        let small = FockBasis::new(k, state.max_particles(), state.statistics())?;
        state.check_basis(&small)?;
        Ok(Self { support, small, state })
    }

    /// Wraps a state on the full space (support = identity).
    pub fn full(basis: &FockBasis, state: MixedState) -> Result<Self> {
        state.check_basis(basis)?;
        Self::new(CMat::identity(basis.modes(), basis.modes()), state)
    }

    /// Normalized `a†(f_1)⋯a†(f_n)Ω` for orbitals in `C^r`.
    pub fn product(modes: usize, n_max: usize, statistics: Statistics, orbitals: &[CVec]) -> Result<Self> {
        if orbitals.iter().any(|f| f.len() != modes) {
            return invalid(format!("orbitals must have {modes} components"));
        }
        let stacked = CMat::from_fn(modes, orbitals.len(), |i, j| orbitals[j][i]);
        let support = frame_for(range_basis(&stacked, SUPPORT_TOLERANCE), n_max, statistics);
        let small = FockBasis::new(support.ncols(), n_max, statistics)?;
        let coords: Vec<CVec> = orbitals.iter().map(|f| support.adjoint() * f).collect();
        let psi = product_state(&small, &coords)?;
        let norm = psi.norm();
        if norm < 1e-14 {
            return invalid("product state vanishes");
        }
        Self::new(support, MixedState::nbody(&small, orbitals.len(), &(psi / c(norm)))?)
    }

    pub fn support(&self) -> &CMat {
        &self.support
    }

    pub fn small_basis(&self) -> &FockBasis {
        &self.small
    }

    pub fn state(&self) -> &MixedState {
        &self.state
    }

    pub fn modes(&self) -> usize {
        self.support.nrows()
    }

    pub fn sector_weights(&self) -> Vec<f64> {
        self.state.sector_weights()
    }

    pub fn particle_number(&self) -> Result<f64> {
        average_particle_number(&self.small, &self.state)
    }

    fn lifts(&self, target: &FockBasis, frame: &CMat) -> Result<Vec<CMat>> {
        (0..=self.small.max_particles()).map(|m| lift_isometry(target, &self.small, frame, m)).collect()
    }

    /// The same state on the full Fock space.
    pub fn expand(&self, full: &FockBasis) -> Result<MixedState> {
        full.check_modes(self.modes())?;
        let l = self.lifts(full, &self.support)?;
        let n = self.small.max_particles();
        let blocks = (0..=n)
            .map(|a| (0..=n).map(|b| &l[a] * self.state.block(a, b) * l[b].adjoint()).collect())
            .collect();
        MixedState::from_blocks(full, blocks)
    }

    /// Re-expresses the state on a larger orthonormal support containing the current one.
    pub fn restate(&self, frame: &CMat) -> Result<Self> {
        let m = frame.adjoint() * &self.support;
        let k = m.ncols();
        let dev = (m.adjoint() * &m - CMat::identity(k, k)).norm();
        if dev > 1e-8 {
            return invalid(format!("new support does not contain the state (deviation {dev:e})"));
        }
        let target = FockBasis::new(frame.ncols(), self.small.max_particles(), self.small.statistics())?;
        let l = self.lifts(&target, &m)?;
        let n = self.small.max_particles();
        let blocks = (0..=n)
            .map(|a| (0..=n).map(|b| &l[a] * self.state.block(a, b) * l[b].adjoint()).collect())
            .collect();
        Self::new(frame.clone(), MixedState::from_blocks(&target, blocks)?)
    }

    /// One-body density matrix `Q [Γ]^{(1)}_small Q*` on `C^r`.
    pub fn onebody_density(&self) -> Result<CMat> {
        if self.small.max_particles() == 0 {
            return Ok(CMat::zeros(self.modes(), self.modes()));
        }
        let g = density_matrix(&self.small, &self.state, 1, 1)?.matrix;
        Ok(&self.support * g * self.support.adjoint())
    }

    pub fn density_profile(&self, space: &OneBodySpace) -> Result<DensityProfile> {
        let lat = space.require_lattice()?;
        if space.dim() != self.modes() {
            return Err(Error::DimensionMismatch { expected: space.dim(), found: self.modes() });
        }
        let g = self.onebody_density()?;
        let dv = lat.cell_volume();
        Ok(DensityProfile { rho: (0..space.dim()).map(|i| g[(i, i)].re / dv).collect(), cell_volume: dv })
    }

    /// `⟨ψ, [Γ]^{(p,q)} ψ'⟩` for full-space sector vectors.
    pub fn pairing(&self, full: &FockBasis, p: usize, psi: &CVec, q: usize, psi2: &CVec) -> Result<C64> {
        pairing_value(self, full, p, psi, q, psi2)
    }

    /// Localization by `B`, carried out on the support `Ran Q + Ran BQ`.
    pub fn localize(&self, loc: &LocalizationOperator) -> Result<Self> {
        if loc.dim() != self.modes() {
            return Err(Error::DimensionMismatch { expected: self.modes(), found: loc.dim() });
        }
        let bq = loc.b() * &self.support;
        let joined = concat_columns(&self.support, &bq);
        let frame = frame_for(range_basis(&joined, SUPPORT_TOLERANCE), self.small.max_particles(), self.small.statistics());
        let moved = self.restate(&frame)?;
        let b_small = frame.adjoint() * &bq * self.support.adjoint() * &frame;
        let small_loc = LocalizationOperator::new(b_small)?;
        let out = localize_via_formula(&moved.small, &moved.state, &small_loc)?;
        Self::new(frame, out)
    }

    /// Trace distance computed on the joint support.
    pub fn trace_distance(&self, other: &Self) -> Result<f64> {
        let joined = concat_columns(&self.support, &other.support);
        let frame = frame_for(range_basis(&joined, SUPPORT_TOLERANCE), self.small.max_particles(), self.small.statistics());
        let (a, b) = (self.restate(&frame)?, other.restate(&frame)?);
        Ok(a.state.trace_distance(&b.state))
    }
}

/// Appends orthonormal directions until the frame has `min_cols` columns
/// (fermionic Fock spaces need at least `N` modes).
fn padded(frame: CMat, min_cols: usize) -> CMat {
    let r = frame.nrows();
    let mut cols: Vec<CVec> = frame.column_iter().map(|c| c.into_owned()).collect();
    let mut i = 0;
    while cols.len() < min_cols.min(r) && i < r {
        if let Some(v) = crate::linalg::gram_schmidt_against(&crate::fock::unit(r, i), &cols) {
            cols.push(v);
        }
        i += 1;
    }
    CMat::from_fn(r, cols.len(), |a, b| cols[b][a])
}

fn frame_for(frame: CMat, n_max: usize, statistics: Statistics) -> CMat {
    let min = if statistics == Statistics::Fermion { n_max.max(1) } else { 1 };
    padded(frame, min)
}

fn concat_columns(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

type Generator = Arc<dyn Fn(usize) -> Result<CompressedState> + Send + Sync>;

/// A family `n ↦ Γ_n` sampled at `indices`, with an optional declared limit.
#[derive(Clone)]
pub struct StateSequence {
    pub description: String,
    pub indices: Vec<usize>,
    pub declared_limit: Option<CompressedState>,
    generator: Generator,
}

impl std::fmt::Debug for StateSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateSequence")
            .field("description", &self.description)
            .field("indices", &self.indices)
            .field("has_limit", &self.declared_limit.is_some())
            .finish()
    }
}

impl StateSequence {
    pub fn new(
        description: impl Into<String>,
        indices: Vec<usize>,
        declared_limit: Option<CompressedState>,
        generator: impl Fn(usize) -> Result<CompressedState> + Send + Sync + 'static,
    ) -> Self {
        Self { description: description.into(), indices, declared_limit, generator: Arc::new(generator) }
    }

    pub fn member(&self, n: usize) -> Result<CompressedState> {
        (self.generator)(n)
    }

    /// All sampled members, generated in parallel, in index order.
    pub fn members(&self) -> Result<Vec<(usize, CompressedState)>> {
        self.indices.par_iter().map(|&n| Ok((n, self.member(n)?))).collect()
    }
}

/// Translates a lattice vector by whole sites. On a Dirichlet box the
/// translate must not lose weight across the wall.
pub fn translate_orbital(space: &OneBodySpace, f: &CVec, shift: &[i64]) -> Result<CVec> {
    let lat = space.require_lattice()?;
    if shift.len() != lat.dim {
        return Err(Error::DimensionMismatch { expected: lat.dim, found: shift.len() });
    }
    let n = lat.points as i64;
    let mut out = CVec::zeros(f.len());
    for site in 0..f.len() {
        if f[site].norm() == 0.0 {
            continue;
        }
        let mut idx = Vec::with_capacity(lat.dim);
        for (i, s) in lat.multi_index(site).into_iter().zip(shift) {
            let j = i as i64 + s;
            let j = match lat.boundary {
                Boundary::Periodic => j.rem_euclid(n),
                Boundary::Dirichlet if (0..n).contains(&j) => j,
                Boundary::Dirichlet => return invalid(format!("translate by {shift:?} leaves the box")),
            };
            idx.push(j as usize);
        }
        out[lat.site_of(&idx)] = f[site];
    }
    Ok(out)
}

/// Permutation unitary `τ_v` on a periodic lattice.
pub fn translation_operator(space: &OneBodySpace, shift: &[i64]) -> Result<CMat> {
    let lat = space.require_lattice()?;
    if lat.boundary != Boundary::Periodic {
        return invalid("translations are unitary only on a periodic lattice");
    }
    let r = space.dim();
    let mut t = CMat::zeros(r, r);
    for site in 0..r {
        let e = crate::fock::unit(r, site);
        let moved = translate_orbital(space, &e, shift)?;
        let target = moved.iter().position(|z| z.norm() > 0.0).expect("permutation");
        t[(target, site)] = c(1.0);
    }
    Ok(t)
}

/// Fock lift `1 ⊕ τ ⊕ τ⊗τ ⊕ ⋯` as sector blocks.
pub fn translation_lift(basis: &FockBasis, space: &OneBodySpace, shift: &[i64]) -> Result<Vec<CMat>> {
    lift_onebody(basis, &translation_operator(space, shift)?)
}

/// Compactly supported bump `cos²(π(x−x₀)/(2w))` on `|x−x₀| < w` (normalized).
pub fn bump(space: &OneBodySpace, center: &[f64], width: f64) -> Result<CVec> {
    let samples = space.sample(|x| {
        let d = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d < width {
            (std::f64::consts::FRAC_PI_2 * d / width).cos().powi(2)
        } else {
            0.0
        }
    })?;
    normalized(CVec::from_iterator(samples.len(), samples.into_iter().map(c)))
}

/// Odd companion of [`bump`] along the first axis (orthogonal to it by parity).
pub fn odd_bump(space: &OneBodySpace, center: &[f64], width: f64) -> Result<CVec> {
    let samples = space.sample(|x| {
        let d = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if d < width {
            (std::f64::consts::PI * (x[0] - center[0]) / width).sin() * (std::f64::consts::FRAC_PI_2 * d / width).cos()
        } else {
            0.0
        }
    })?;
    normalized(CVec::from_iterator(samples.len(), samples.into_iter().map(c)))
}

fn normalized(v: CVec) -> Result<CVec> {
    let n = v.norm();
    if n < 1e-14 {
        return invalid("orbital vanishes on the lattice");
    }
    Ok(v / c(n))
}

/// Two-body state of `φ ∧ φ_n` (fermions) or `φ ∨ φ_n` (bosons), with `φ_n`
/// the translate of `escaping` by `n` sites along the first axis, made
/// orthogonal to `φ`.
pub fn escaping_product_state(
    space: &OneBodySpace,
    statistics: Statistics,
    phi: &CVec,
    escaping: &CVec,
    n: usize,
) -> Result<CompressedState> {
    let lat = space.require_lattice()?;
    let mut shift = vec![0; lat.dim];
    shift[0] = n as i64;
    let moved = translate_orbital(space, escaping, &shift)?;
    let phi = normalized(phi.clone())?;
    let phi_n = crate::linalg::gram_schmidt_against(&moved, std::slice::from_ref(&phi))
        .ok_or_else(|| Error::InvalidInput("translate is parallel to the fixed orbital".into()))?;
    CompressedState::product(space.dim(), 2, statistics, &[phi, phi_n])
}

/// Escaping sequence with declared limit `0 ⊕ |φ⟩⟨φ| ⊕ 0` on `F^{≤2}`.
pub fn escaping_sequence(
    space: &OneBodySpace,
    statistics: Statistics,
    phi: &CVec,
    escaping: &CVec,
    indices: Vec<usize>,
) -> Result<StateSequence> {
    let limit = CompressedState::product(space.dim(), 2, statistics, std::slice::from_ref(phi))?;
    let (space, phi, escaping) = (space.clone(), phi.clone(), escaping.clone());
    Ok(StateSequence::new("escaping two-body product", indices, Some(limit), move |n| {
        escaping_product_state(&space, statistics, &phi, &escaping, n)
    }))
}

/// Bosonic Hartree states `φ_n^{⊗N}` with declared limit
/// `⊕_k C(N,k)(1−‖φ‖²)^{N−k} |φ^{⊗k}⟩⟨φ^{⊗k}|` for the weak limit `φ`.
pub fn hartree_sequence(
    n_particles: usize,
    family: impl Fn(usize) -> Result<CVec> + Send + Sync + 'static,
    weak_limit: &CVec,
    indices: Vec<usize>,
) -> Result<StateSequence> {
    let r = weak_limit.len();
    let x = weak_limit.norm_squared();
    if x > 1.0 + 1e-12 {
        return invalid("weak limit must have norm at most one");
    }
    let frame = if x > 0.0 {
        CMat::from_fn(r, 1, |i, _| weak_limit[i] / c(x.sqrt()))
    } else {
        CMat::from_fn(r, 1, |i, _| c(if i == 0 { 1.0 } else { 0.0 }))
    };
    let small = FockBasis::new(1, n_particles, Statistics::Boson)?;
    let mut limit = MixedState::zero(&small);
    let mut blocks = limit.clone().into_blocks();
    for (k, row) in blocks.iter_mut().enumerate() {
        let w = binomial(n_particles, k) * (1.0 - x).max(0.0).powi((n_particles - k) as i32) * x.powi(k as i32);
        row[k][(0, 0)] = c(w);
    }
    limit = MixedState::from_blocks(&small, blocks)?;
    let limit = CompressedState::new(frame, limit)?;
    Ok(StateSequence::new("Hartree states", indices, Some(limit), move |n| {
        let f = normalized(family(n)?)?;
        CompressedState::product(r, n_particles, Statistics::Boson, &vec![f; n_particles])
    }))
}

/// How the particles of a sequence split in the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Strong,
    Vacuum,
    Intermediate,
}

/// Slater determinants of `kept` orbitals and `escaping` orbitals translated
/// by `n` sites; the declared limit is the Slater determinant of `kept`.
pub fn hf_escaping_sequence(
    space: &OneBodySpace,
    kept: &[CVec],
    escaping: &[CVec],
    indices: Vec<usize>,
) -> Result<(StateSequence, LimitKind)> {
    let lat = space.require_lattice()?;
    let n = kept.len() + escaping.len();
    let r = space.dim();
    let kind = match (kept.len(), escaping.len()) {
        (_, 0) => LimitKind::Strong,
        (0, _) => LimitKind::Vacuum,
        _ => LimitKind::Intermediate,
    };
    check_orthonormal(kept)?;
    let limit = if kept.is_empty() {
        let frame = frame_for(CMat::zeros(r, 0), n, Statistics::Fermion);
        let small = FockBasis::new(frame.ncols(), n, Statistics::Fermion)?;
        CompressedState::new(frame, MixedState::vacuum(&small))?
    } else {
        CompressedState::product(r, n, Statistics::Fermion, kept)?
    };
    let (space, kept, escaping, dim) = (space.clone(), kept.to_vec(), escaping.to_vec(), lat.dim);
    let seq = StateSequence::new("escaping Hartree-Fock states", indices, Some(limit), move |k| {
        let mut shift = vec![0; dim];
        shift[0] = k as i64;
        let mut orbitals = kept.clone();
        for f in &escaping {
            orbitals.push(translate_orbital(&space, f, &shift)?);
        }
        check_orthonormal(&orbitals)?;
        CompressedState::product(space.dim(), n, Statistics::Fermion, &orbitals)
    });
    Ok((seq, kind))
}

fn check_orthonormal(orbitals: &[CVec]) -> Result<()> {
    for (i, f) in orbitals.iter().enumerate() {
        for (j, g) in orbitals.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (f.dotc(g) - c(target)).norm();
            if dev > 1e-8 {
                return invalid(format!("orbitals {i} and {j} fail orthonormality by {dev:e}"));
            }
        }
    }
    Ok(())
}

/// One-body propagator `e^{−itT}` from the eigendecomposition of the kinetic matrix.
pub fn propagator(space: &OneBodySpace, t: f64) -> Result<CMat> {
    let kin = kinetic_operator(space)?;
    let (vals, vecs) = eigh(kin.matrix());
    let phases = CVec::from_iterator(vals.len(), vals.iter().map(|e| C64::from_polar(1.0, -e * t)));
    Ok(&vecs * CMat::from_diagonal(&phases) * vecs.adjoint())
}

use crate::linalg::C64;

/// `Γ(t) = 𝕌(t) Γ₀ 𝕌(t)*` at `times[n]`. No limit is declared: on a finite box
/// the dynamics is quasi-periodic.
pub fn free_evolution_sequence(
    space: &OneBodySpace,
    basis: &FockBasis,
    gamma0: &MixedState,
    times: Vec<f64>,
) -> Result<StateSequence> {
    gamma0.check_basis(basis)?;
    let (space, basis, gamma0) = (space.clone(), basis.clone(), gamma0.clone());
    let indices = (0..times.len()).collect();
    Ok(StateSequence::new("free evolution", indices, None, move |n| {
        let t = *times.get(n).ok_or_else(|| Error::InvalidInput(format!("no time with index {n}")))?;
        let u = propagator(&space, t)?;
        CompressedState::full(&basis, evolve(&basis, &gamma0, &u)?)
    }))
}

/// Conjugation by the lifted one-body unitary.
pub fn evolve(basis: &FockBasis, gamma: &MixedState, u: &CMat) -> Result<MixedState> {
    let l = lift_onebody(basis, u)?;
    let n = basis.max_particles();
    let blocks =
        (0..=n).map(|a| (0..=n).map(|b| &l[a] * gamma.block(a, b) * l[b].adjoint()).collect()).collect();
    MixedState::from_blocks(basis, blocks)
}

/// `max_{p,q} ‖[Γ(t)]^{(p,q)} − U^{⊗p}[Γ₀]^{(p,q)}(U*)^{⊗q}‖` (max entry).
pub fn evolution_identity_residual(basis: &FockBasis, gamma0: &MixedState, gamma_t: &MixedState, u: &CMat) -> Result<f64> {
    let l = lift_onebody(basis, u)?;
    let n = basis.max_particles();
    let mut worst: f64 = 0.0;
    for p in 0..=n {
        for q in 0..=n {
            let lhs = density_matrix(basis, gamma_t, p, q)?.matrix;
            let rhs = &l[p] * density_matrix(basis, gamma0, p, q)?.matrix * l[q].adjoint();
            worst = worst.max((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Ok(worst)
}

/// Compactly supported test vectors: random orbitals on `window` and their
/// normalized products in sectors `0..=p_max`.
#[derive(Debug, Clone)]
pub struct TestFamily {
    pub window: Vec<usize>,
    pub basis: FockBasis,
    /// `(p, vector in sector p)`.
    pub vectors: Vec<(usize, CVec)>,
}

impl TestFamily {
    pub fn random(r: usize, statistics: Statistics, window: &[usize], per_sector: usize, p_max: usize, seed: u64) -> Result<Self> {
        if window.iter().any(|&s| s >= r) || window.is_empty() {
            return invalid("test window must be a nonempty set of sites");
        }
        let basis = FockBasis::new(r, p_max, statistics)?;
        let mut rng = random::rng(seed);
        let mut vectors = vec![(0, CVec::from_element(1, c(1.0)))];
        for p in 1..=p_max {
            let mut made = 0;
            while made < per_sector {
                let orbitals: Vec<CVec> = (0..p)
                    .map(|_| {
                        let mut f = CVec::zeros(r);
                        for &s in window {
                            f[s] = random::complex_normal(&mut rng);
                        }
                        f
                    })
                    .collect();
                let v = product_state(&basis, &orbitals)?;
                let norm = v.norm();
                if norm > 1e-8 {
                    vectors.push((p, v / c(norm)));
                    made += 1;
                }
            }
        }
        Ok(Self { window: window.to_vec(), basis, vectors })
    }

    /// `max_{ψ∈p, ψ'∈q} |⟨ψ,[Γ]^{(p,q)}ψ'⟩ − ⟨ψ,[Γ']^{(p,q)}ψ'⟩|` per `(p,q)`.
    pub fn deviations(&self, a: &CompressedState, b: &CompressedState) -> Result<Vec<(usize, usize, f64)>> {
        let p_max = self.basis.max_particles();
        let mut out = Vec::new();
        for p in 0..=p_max {
            for q in 0..=p_max {
                let mut worst: f64 = 0.0;
                for (pp, u) in self.vectors.iter().filter(|(pp, _)| *pp == p) {
                    for (qq, v) in self.vectors.iter().filter(|(qq, _)| *qq == q) {
                        let da = pairing_value(a, &self.basis, *pp, u, *qq, v)?;
                        let db = pairing_value(b, &self.basis, *pp, u, *qq, v)?;
                        worst = worst.max((da - db).norm());
                    }
                }
                out.push((p, q, worst));
            }
        }
        Ok(out)
    }
}

fn pairing_value(s: &CompressedState, full: &FockBasis, p: usize, u: &CVec, q: usize, v: &CVec) -> Result<C64> {
    let n = s.small.max_particles();
    if p > n || q > n {
        return Ok(c(0.0));
    }
    let dm = density_matrix(&s.small, &s.state, p, q)?.matrix;
    let pu = lift_isometry(full, &s.small, &s.support, p)?.adjoint() * u;
    let qv = lift_isometry(full, &s.small, &s.support, q)?.adjoint() * v;
    Ok((pu.adjoint() * dm * qv)[(0, 0)])
}

/// Trend tag fitted to a deviation series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Trend {
    Vanished,
    Decaying,
    Flat,
    Growing,
}

/// Least-squares slope of `log10(dev)` against `n`.
pub fn fit_trend(ns: &[usize], values: &[f64]) -> Trend {
    if values.last().is_some_and(|&v| v <= 1e-12) {
        return Trend::Vanished;
    }
    if ns.len() < 2 {
        return Trend::Flat;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.max(1e-300).log10()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    if slope < -1e-3 {
        Trend::Decaying
    } else if slope > 1e-3 {
        Trend::Growing
    } else {
        Trend::Flat
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairTrend {
    pub p: usize,
    pub q: usize,
    pub final_deviation: f64,
    pub trend: Trend,
}

/// Pairing deviations from the declared limit plus particle-number diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub description: String,
    pub rows: Vec<ConvergenceRow>,
    pub trends: Vec<PairTrend>,
    pub particle_numbers: Vec<(usize, f64)>,
    pub limit_particle_number: f64,
    /// `tr(𝒩Γ) ≤ min_n tr(𝒩Γ_n) + 1e-10`.
    pub lower_semicontinuity: bool,
    /// `‖Γ_n − Γ‖_1` at the last sampled index.
    pub final_trace_distance: f64,
}

impl ConvergenceReport {
    pub fn max_final_deviation(&self) -> f64 {
        self.trends.iter().map(|t| t.final_deviation).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "p", "q", "deviation"])?;
        for row in &self.rows {
            out.write_record([row.n.to_string(), row.p.to_string(), row.q.to_string(), format!("{:.16e}", row.deviation)])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json(&self, w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

pub fn geometric_convergence_report(seq: &StateSequence, tests: &TestFamily) -> Result<ConvergenceReport> {
    let limit = seq
        .declared_limit
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("sequence has no declared limit".into()))?;
    let members = seq.members()?;
    let per_member: Vec<(Vec<(usize, usize, f64)>, f64)> = members
        .par_iter()
        .map(|(_, s)| Ok((tests.deviations(s, limit)?, s.particle_number()?)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut particle_numbers = Vec::new();
    for ((n, _), (devs, np)) in members.iter().zip(&per_member) {
        rows.extend(devs.iter().map(|&(p, q, deviation)| ConvergenceRow { n: *n, p, q, deviation }));
        particle_numbers.push((*n, *np));
    }
    let ns: Vec<usize> = members.iter().map(|(n, _)| *n).collect();
    let pairs = per_member.first().map(|(d, _)| d.len()).unwrap_or(0);
    let trends = (0..pairs)
        .map(|i| {
            let series: Vec<f64> = per_member.iter().map(|(d, _)| d[i].2).collect();
            let (p, q, _) = per_member[0].0[i];
            PairTrend { p, q, final_deviation: *series.last().unwrap(), trend: fit_trend(&ns, &series) }
        })
        .collect();
    let limit_n = limit.particle_number()?;
    let min_n = particle_numbers.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let final_trace_distance = match members.last() {
        Some((_, s)) => s.trace_distance(limit)?,
        None => 0.0,
    };
    Ok(ConvergenceReport {
        description: seq.description.clone(),
        rows,
        trends,
        particle_numbers,
        limit_particle_number: limit_n,
        lower_semicontinuity: limit_n <= min_n + 1e-10,
        final_trace_distance,
    })
}

/// Time-averaged absolute pairings `⟨ψ,[Γ(t)]^{(p,q)}ψ'⟩` over consecutive
/// windows of `window` members (weak-decay report for free evolution).
pub fn averaged_pairings(seq: &StateSequence, tests: &TestFamily, window: usize) -> Result<Vec<(usize, usize, Vec<f64>)>> {
    let members = seq.members()?;
    let p_max = tests.basis.max_particles();
    let zero = {
        let stats = tests.basis.statistics();
        let frame = frame_for(CMat::zeros(tests.basis.modes(), 0), p_max, stats);
        let small = FockBasis::new(frame.ncols(), p_max, stats)?;
        CompressedState { support: frame, small: small.clone(), state: MixedState::zero(&small) }
    };
    let series: Vec<Vec<(usize, usize, f64)>> =
        members.par_iter().map(|(_, s)| tests.deviations(s, &zero)).collect::<Result<_>>()?;
    let pairs = series.first().map_or(0, Vec::len);
    Ok((0..pairs)
        .map(|i| {
            let (p, q, _) = series[0][i];
            let avgs = series
                .chunks(window.max(1))
                .map(|ch| ch.iter().map(|s| s[i].2).sum::<f64>() / ch.len() as f64)
                .collect();
            (p, q, avgs)
        })
        .collect())
}

/// `sup_x Σ_{|y−x|≤R} ρ(y) h^d` over lattice centers.
pub fn concentration_function(space: &OneBodySpace, profile: &DensityProfile, radius: f64) -> Result<f64> {
    let lat = space.require_lattice()?;
    if radius <= 0.0 {
        return invalid("radius must be positive");
    }
    if profile.rho.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: profile.rho.len() });
    }
    let occ = profile.occupations();
    let r = space.dim();
    Ok((0..r)
        .map(|x| (0..r).filter(|&y| lat.distance(x, y) <= radius + 1e-12).map(|y| occ[y]).sum::<f64>())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub radii: Vec<f64>,
    /// `values[i][j]`: member `i`, radius `j`.
    pub values: Vec<Vec<f64>>,
    /// Trend per radius across members.
    pub trend: Vec<Trend>,
}

pub fn concentration_report(space: &OneBodySpace, profiles: &[(usize, DensityProfile)], radii: &[f64]) -> Result<ConcentrationReport> {
    let values: Vec<Vec<f64>> = profiles
        .iter()
        .map(|(_, p)| radii.iter().map(|&r| concentration_function(space, p, r)).collect())
        .collect::<Result<_>>()?;
    let ns: Vec<usize> = profiles.iter().map(|(n, _)| *n).collect();
    let trend = (0..radii.len())
        .map(|j| fit_trend(&ns, &values.iter().map(|v| v[j]).collect::<Vec<_>>()))
        .collect();
    Ok(ConcentrationReport { radii: radii.to_vec(), values, trend })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{assemble_hamiltonian, unit};
    use crate::onebody::{potential_operator, window_localizer, LatticeOptions, TwoBodyKernel};
    use crate::states::random_number_conserving;

    fn line(n: usize) -> OneBodySpace {
        OneBodySpace::lattice(1, n, n as f64).unwrap()
    }

    fn escaping_setup(n_sites: usize, stats: Statistics) -> (OneBodySpace, CVec, CVec, TestFamily) {
        let space = line(n_sites);
        let x0 = space.geometry().unwrap().position(10)[0];
        let phi = bump(&space, &[x0], 4.0).unwrap();
        let esc = odd_bump(&space, &[x0], 4.0).unwrap();
        let tests = TestFamily::random(n_sites, stats, &(4..17).collect::<Vec<_>>(), 3, 2, 11).unwrap();
        (space, phi, esc, tests)
    }

    #[test]
    fn escaping_start_and_limit() {
        let (space, phi, esc, tests) = escaping_setup(64, Statistics::Fermion);
        assert!(phi.dotc(&esc).norm() < 1e-14);
        let s0 = escaping_product_state(&space, Statistics::Fermion, &phi, &esc, 0).unwrap();
        let w = s0.sector_weights();
        assert!(w[0].abs() < 1e-14 && w[1].abs() < 1e-14 && (w[2] - 1.0).abs() < 1e-14);
        let seq = escaping_sequence(&space, Statistics::Fermion, &phi, &esc, vec![0, 4, 8, 16, 32]).unwrap();
        let report = geometric_convergence_report(&seq, &tests).unwrap();
        assert!(report.max_final_deviation() <= 1e-6, "{:?}", report.trends);
        assert!(report.lower_semicontinuity);
        // mass is lost at infinity, so the convergence is not strong
        assert!((report.final_trace_distance - 2.0).abs() < 1e-8);
        let first: f64 = report.rows.iter().filter(|r| r.n == 0).map(|r| r.deviation).fold(0.0, f64::max);
        assert!(first > 1e-3);
    }

    #[test]
    fn escaping_bosons_and_local_compactness() {
        let (space, phi, esc, tests) = escaping_setup(64, Statistics::Boson);
        let seq = escaping_sequence(&space, Statistics::Boson, &phi, &esc, vec![2, 8, 32]).unwrap();
        let report = geometric_convergence_report(&seq, &tests).unwrap();
        assert!(report.max_final_deviation() <= 1e-6);
        let chi: Vec<f64> = (0..64).map(|i| if (3..18).contains(&i) { 1.0 } else { 0.0 }).collect();
        let loc = window_localizer(&space, &chi).unwrap();
        let limit = seq.declared_limit.as_ref().unwrap().localize(&loc).unwrap();
        let last = seq.member(32).unwrap().localize(&loc).unwrap();
        assert!(last.trace_distance(&limit).unwrap() <= 1e-6);
        let early = seq.member(2).unwrap().localize(&loc).unwrap();
        assert!(early.trace_distance(&limit).unwrap() > 1e-3);
    }

    #[test]
    fn translate_leaving_box_is_rejected() {
        let (space, phi, esc, _) = escaping_setup(32, Statistics::Fermion);
        assert!(escaping_product_state(&space, Statistics::Fermion, &phi, &esc, 20).is_err());
        assert!(escaping_product_state(&space, Statistics::Fermion, &phi, &phi, 0).is_err());
    }

    #[test]
    fn compressed_matches_full() {
        let (space, phi, esc, _) = escaping_setup(20, Statistics::Fermion);
        let s = escaping_product_state(&space, Statistics::Fermion, &phi, &esc, 3).unwrap();
        let full = FockBasis::new(20, 2, Statistics::Fermion).unwrap();
        let big = s.expand(&full).unwrap();
        let chi: Vec<f64> = (0..20).map(|i| if i < 12 { 1.0 } else { 0.5 }).collect();
        let loc = window_localizer(&space, &chi).unwrap();
        let direct = localize_via_formula(&full, &big, &loc).unwrap();
        let compressed = s.localize(&loc).unwrap().expand(&full).unwrap();
        assert!(direct.max_block_deviation(&compressed) < 1e-12);
        let g1 = density_matrix(&full, &big, 1, 1).unwrap().matrix;
        assert!((g1 - s.onebody_density().unwrap()).norm() < 1e-12);
    }

    #[test]
    fn hartree_limits() {
        let space = line(32);
        let a = bump(&space, &[-10.0], 3.0).unwrap();
        let b = bump(&space, &[-10.0], 3.0).unwrap();
        let sp = space.clone();
        let family = move |n: usize| Ok((&a + translate_orbital(&sp, &b, &[n as i64])?) / c(2f64.sqrt()));
        let weak = bump(&space, &[-10.0], 3.0).unwrap() / c(2f64.sqrt());
        let seq = hartree_sequence(2, family, &weak, vec![8, 12, 16]).unwrap();
        let w = seq.declared_limit.as_ref().unwrap().sector_weights();
        assert!((w[0] - 0.25).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14 && (w[2] - 0.25).abs() < 1e-14);
        let tests = TestFamily::random(32, Statistics::Boson, &(0..11).collect::<Vec<_>>(), 2, 2, 3).unwrap();
        let report = geometric_convergence_report(&seq, &tests).unwrap();
        assert!(report.max_final_deviation() < 1e-12);
        assert!(report.lower_semicontinuity);

        let phi = bump(&space, &[0.0], 3.0).unwrap();
        let p2 = phi.clone();
        let constant = hartree_sequence(3, move |_| Ok(p2.clone()), &phi, vec![0, 1]).unwrap();
        let report = geometric_convergence_report(&constant, &tests).unwrap();
        assert!(report.max_final_deviation() < 1e-12);
        assert!(report.final_trace_distance < 1e-12);
        let vacuum = hartree_sequence(2, move |_| Ok(phi.clone()), &CVec::zeros(32), vec![0]).unwrap();
        assert!((vacuum.declared_limit.unwrap().sector_weights()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hf_trichotomy() {
        let space = line(40);
        let f1 = bump(&space, &[-15.0], 3.0).unwrap();
        let f2 = bump(&space, &[-8.0], 3.0).unwrap();
        let tests = TestFamily::random(40, Statistics::Fermion, &(0..20).collect::<Vec<_>>(), 2, 2, 5).unwrap();
        let (seq, kind) = hf_escaping_sequence(&space, &[f1.clone()], &[f2.clone()], vec![6, 12, 24]).unwrap();
        assert_eq!(kind, LimitKind::Intermediate);
        let w = seq.declared_limit.as_ref().unwrap().sector_weights();
        assert!((w[1] - 1.0).abs() < 1e-14);
        let report = geometric_convergence_report(&seq, &tests).unwrap();
        assert!(report.max_final_deviation() < 1e-12 && report.lower_semicontinuity);
        let (all_kept, kind) = hf_escaping_sequence(&space, &[f1.clone(), f2.clone()], &[], vec![0, 5]).unwrap();
        assert_eq!(kind, LimitKind::Strong);
        let report = geometric_convergence_report(&all_kept, &tests).unwrap();
        assert!(report.final_trace_distance < 1e-12);
        let (gone, kind) = hf_escaping_sequence(&space, &[], &[f1.clone(), f2.clone()], vec![20]).unwrap();
        assert_eq!(kind, LimitKind::Vacuum);
        assert!((gone.declared_limit.as_ref().unwrap().sector_weights()[0] - 1.0).abs() < 1e-14);
        let (bad, _) = hf_escaping_sequence(&space, &[f2.clone()], &[f1], vec![0, 7]).unwrap();
        assert!(bad.member(7).is_err());
    }

    #[test]
    fn free_evolution_identities() {
        let space = line(6);
        let basis = FockBasis::new(6, 2, Statistics::Boson).unwrap();
        let mut rng = random::rng(4);
        let g0 = random_number_conserving(&mut rng, &basis);
        let seq = free_evolution_sequence(&space, &basis, &g0, vec![0.0, 0.7, 3.0]).unwrap();
        let members = seq.members().unwrap();
        assert!(members[0].1.state().max_block_deviation(&g0) < 1e-12);
        let n0 = average_particle_number(&basis, &g0).unwrap();
        for (i, t) in [0.0, 0.7, 3.0].iter().enumerate() {
            let gt = members[i].1.state();
            assert!((average_particle_number(&basis, gt).unwrap() - n0).abs() < 1e-10);
            let u = propagator(&space, *t).unwrap();
            assert!(evolution_identity_residual(&basis, &g0, gt, &u).unwrap() <= 1e-10);
        }
        let tests = TestFamily::random(6, Statistics::Boson, &[0, 1], 1, 1, 2).unwrap();
        assert!(geometric_convergence_report(&seq, &tests).is_err());
        let avg = averaged_pairings(&seq, &tests, 2).unwrap();
        assert_eq!(avg[0].2.len(), 2);
    }

    #[test]
    fn translations() {
        let opts = LatticeOptions { boundary: Boundary::Periodic, ..Default::default() };
        let space = OneBodySpace::lattice_with(1, 6, 6.0, opts).unwrap();
        assert_eq!(translation_operator(&space, &[0]).unwrap(), CMat::identity(6, 6));
        assert_eq!(translation_operator(&space, &[6]).unwrap(), CMat::identity(6, 6));
        assert!(translation_operator(&line(6), &[1]).is_err());
        let basis = FockBasis::new(6, 2, Statistics::Fermion).unwrap();
        let h = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 1.0, 1.0).unwrap();
        let ham = assemble_hamiltonian(&basis, &h, &w).unwrap().to_dense();
        let lift = translation_lift(&basis, &space, &[2]).unwrap();
        let mut big = CMat::zeros(basis.dim(), basis.dim());
        for (n, l) in lift.iter().enumerate() {
            let rg = basis.sector_range(n);
            big.view_mut((rg.start, rg.start), l.shape()).copy_from(l);
        }
        assert!((&big * &ham * big.adjoint() - &ham).norm() < 1e-10);
        // a confining potential breaks the symmetry
        let v = potential_operator(&space, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let hv = assemble_hamiltonian(&basis, &h.add(&v).unwrap(), &w).unwrap().to_dense();
        assert!((&big * &hv * big.adjoint() - &hv).norm() > 1e-3);
    }

    #[test]
    fn concentration() {
        let space = line(10);
        let basis = FockBasis::new(10, 1, Statistics::Fermion).unwrap();
        let one = MixedState::nbody(&basis, 1, &unit(10, 3)).unwrap();
        let prof = crate::states::density_profile(&basis, &one, &space).unwrap();
        assert!((concentration_function(&space, &prof, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let uniform = DensityProfile { rho: vec![0.2; 10], cell_volume: 1.0 };
        assert!((concentration_function(&space, &uniform, 1.0).unwrap() - 0.2 * 3.0).abs() < 1e-14);
        // spreading Gaussians vanish at fixed radius
        let wide = line(64);
        let profiles: Vec<(usize, DensityProfile)> = [1usize, 2, 4, 8]
            .iter()
            .map(|&s| {
                let rho: Vec<f64> = wide.sample(|x| (-(x[0] / s as f64).powi(2)).exp()).unwrap();
                let total: f64 = rho.iter().sum();
                (s, DensityProfile { rho: rho.iter().map(|r| r / total).collect(), cell_volume: 1.0 })
            })
            .collect();
        let rep = concentration_report(&wide, &profiles, &[1.0, 3.0]).unwrap();
        assert!(rep.trend.iter().all(|t| *t == Trend::Decaying));
        assert!(rep.values.windows(2).all(|w| w[1][0] < w[0][0]));
        assert!(rep.values.iter().flatten().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
    }

    #[test]
    fn report_exports() {
        let (space, phi, esc, tests) = escaping_setup(32, Statistics::Fermion);
        let seq = escaping_sequence(&space, Statistics::Fermion, &phi, &esc, vec![0, 8]).unwrap();
        let rep = geometric_convergence_report(&seq, &tests).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,p,q,deviation\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 9);
        let mut js = Vec::new();
        rep.write_json(&mut js).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
        assert!(v["trends"].as_array().unwrap().len() == 9);
    }
}
