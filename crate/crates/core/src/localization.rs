//! Geometric localization `Γ ↦ Γ_B`: the unique state whose density
//! matrices are `B^{⊗p} [Γ]^{(p,q)} (B*)^{⊗q}`.
//!
//! Two independent constructions are provided: the density-matrix formula
//! (production path) and the doubled one-body space `h ⊕ h` with a partial
//! trace over the second copy (oracle for small sizes).

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::fock::{lift_isometry, lift_onebody, product_state, FockBasis, Statistics};
use crate::linalg::{binomial, c, eigh, CMat, CVec, C64};
use crate::onebody::LocalizationOperator;
use crate::states::{blocks_from_density_matrices, density_matrix_table, natural_orbitals, MixedState, RANK_THRESHOLD};

/// Largest doubled Fock dimension accepted by the oracle.
pub const DOUBLING_CAP: usize = 2_000;
/// Largest tensor dimension `r^N` accepted by the N-body partial-trace route.
pub const TENSOR_CAP: usize = 1 << 22;

/// A localized state with its sector weights `tr G_k^B`.
#[derive(Debug, Clone)]
pub struct LocalizedDecomposition {
    pub parent: MixedState,
    pub localizer: LocalizationOperator,
    pub result: MixedState,
    pub sector_weights: Vec<f64>,
}

impl LocalizedDecomposition {
    fn new(parent: &MixedState, localizer: &LocalizationOperator, result: MixedState) -> Self {
        let sector_weights = result.sector_weights();
        Self { parent: parent.clone(), localizer: localizer.clone(), result, sector_weights }
    }
}

fn check_localizer(basis: &FockBasis, loc: &LocalizationOperator) -> Result<()> {
    basis.check_modes(loc.dim())
}

/// Lifted blocks `Γ(B)` on each sector; diagonal `B` gives diagonal lifts.
fn lifted_blocks(basis: &FockBasis, b: &CMat, diagonal: bool) -> Result<Vec<CMat>> {
    if !diagonal {
        return lift_onebody(basis, b);
    }
    Ok((0..=basis.max_particles())
        .map(|n| {
            let d = CVec::from_iterator(
                basis.sector_dim(n),
                basis.sector(n).iter().map(|t| t.iter().fold(c(1.0), |acc, &i| acc * b[(i, i)])),
            );
            CMat::from_diagonal(&d)
        })
        .collect())
}

fn conjugate_blocks(lifts: &[CMat], diagonal: bool, x: &CMat, p: usize, q: usize) -> CMat {
    if diagonal {
        let (lp, lq) = (&lifts[p], &lifts[q]);
        CMat::from_fn(x.nrows(), x.ncols(), |i, j| lp[(i, i)] * x[(i, j)] * lq[(j, j)].conj())
    } else {
        &lifts[p] * x * lifts[q].adjoint()
    }
}

/// `Γ_B` from `[Γ_B]^{(p,q)} = Γ(B)_p [Γ]^{(p,q)} Γ(B)_q*` followed by the
/// inversion of the triangular density-matrix system.
pub fn localize_via_formula(basis: &FockBasis, state: &MixedState, loc: &LocalizationOperator) -> Result<MixedState> {
    check_localizer(basis, loc)?;
    let diagonal = loc.is_diagonal();
    let lifts = lifted_blocks(basis, loc.b(), diagonal)?;
    let table = density_matrix_table(basis, state)?;
    let localized: Vec<Vec<CMat>> = table
        .iter()
        .enumerate()
        .map(|(p, row)| row.iter().enumerate().map(|(q, x)| conjugate_blocks(&lifts, diagonal, x, p, q)).collect())
        .collect();
    let out = blocks_from_density_matrices(basis, &localized)?;
    out.validate()?;
    Ok(out)
}

/// Oracle: lift `Γ` through the isometry `f ↦ Bf ⊕ √(1−B*B) f` into the
/// Fock space over `h ⊕ h` (first copy = modes `0..r`), then take the partial
/// trace over the occupations of the second copy.
pub fn localize_via_doubling(basis: &FockBasis, state: &MixedState, loc: &LocalizationOperator) -> Result<MixedState> {
    check_localizer(basis, loc)?;
    state.check_basis(basis)?;
    let r = basis.modes();
    let n_max = basis.max_particles();
    let doubled_dim: usize = (0..=n_max).map(|n| basis.statistics().sector_dim(2 * r, n)).sum();
    if doubled_dim > DOUBLING_CAP {
        return Err(Error::CapExceeded { what: "doubled Fock dimension", value: doubled_dim, cap: DOUBLING_CAP });
    }
    let doubled = FockBasis::new(2 * r, n_max, basis.statistics())?;
    let mut v = CMat::zeros(2 * r, r);
    v.view_mut((0, 0), (r, r)).copy_from(loc.b());
    v.view_mut((r, 0), (r, r)).copy_from(loc.complement());
    let lifts: Vec<CMat> = (0..=n_max).map(|n| lift_isometry(&doubled, basis, &v, n)).collect::<Result<_>>()?;
    partial_trace_second_copy(basis, &doubled, |m, n| &lifts[m] * state.block(m, n) * lifts[n].adjoint())
        .and_then(|blocks| MixedState::from_blocks(basis, blocks))
}

/// Splits a doubled-space tuple into (first-copy tuple, second-copy tuple shifted to `0..`).
fn split_tuple(t: &[usize], r: usize) -> (Vec<usize>, Vec<usize>) {
    let k = t.partition_point(|&x| x < r);
    (t[..k].to_vec(), t[k..].iter().map(|&x| x - r).collect())
}

/// Partial trace over the second copy of a doubled basis whose first copy
/// has `basis.modes()` modes. `block(m, n)` yields the doubled `(m,n)` block.
fn partial_trace_second_copy(
    basis: &FockBasis,
    doubled: &FockBasis,
    block: impl Fn(usize, usize) -> CMat,
) -> Result<Vec<Vec<CMat>>> {
    let r = basis.modes();
    let n_max = basis.max_particles();
    let mut out: Vec<Vec<CMat>> = (0..=n_max)
        .map(|a| (0..=n_max).map(|b| CMat::zeros(basis.sector_dim(a), basis.sector_dim(b))).collect())
        .collect();
    // labels[m][idx] = (first-copy sector, first-copy index, second-copy tuple)
    let labels: Vec<Vec<(usize, usize, Vec<usize>)>> = (0..=n_max)
        .map(|m| {
            doubled
                .sector(m)
                .iter()
                .map(|t| {
                    let (t1, t2) = split_tuple(t, r);
                    (t1.len(), basis.index_of(&t1).expect("first-copy tuple fits"), t2)
                })
                .collect()
        })
        .collect();
    for m in 0..=n_max {
        for n in 0..=n_max {
            let g = block(m, n);
            if g.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let mut by_spectator: std::collections::HashMap<&[usize], Vec<usize>> = std::collections::HashMap::new();
            for (j, (_, _, t2)) in labels[n].iter().enumerate() {
                by_spectator.entry(t2.as_slice()).or_default().push(j);
            }
            for (i, (si, ii, t2)) in labels[m].iter().enumerate() {
                if let Some(cols) = by_spectator.get(t2.as_slice()) {
                    for &j in cols {
                        let (sj, jj, _) = &labels[n][j];
                        out[*si][*sj][(*ii, *jj)] += g[(i, j)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Applies `ops[k]` to tensor factor `k` of a vector in `h^{⊗n}`.
fn apply_factorwise(v: &CVec, ops: &[&CMat], r: usize) -> CVec {
    let n = ops.len();
    let mut cur = v.clone();
    for (k, op) in ops.iter().enumerate() {
        let inner = r.pow((n - k - 1) as u32);
        let outer = r.pow(k as u32);
        let mut next = CVec::zeros(cur.len());
        for o in 0..outer {
            for a in 0..r {
                for b in 0..r {
                    let w = op[(a, b)];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (dst, src) = ((o * r + a) * inner, (o * r + b) * inner);
                    for s in 0..inner {
                        next[dst + s] += w * cur[src + s];
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Localization of a pure `N`-body state through the partial-trace formula
/// `G_k^B = C(N,k) tr_{k+1→N}(B^{⊗k} ⊗ C^{⊗(N−k)} |Ψ⟩⟨Ψ| (…)*)`.
pub fn localize_nbody(basis: &FockBasis, n: usize, psi: &CVec, loc: &LocalizationOperator) -> Result<LocalizedDecomposition> {
    check_localizer(basis, loc)?;
    basis.check_sector(n)?;
    let norm = psi.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm });
    }
    let r = basis.modes();
    let tdim = r.checked_pow(n as u32).unwrap_or(usize::MAX);
    if tdim > TENSOR_CAP {
        return Err(Error::CapExceeded { what: "N-body tensor dimension", value: tdim, cap: TENSOR_CAP });
    }
    let en = crate::fock::tensor_embedding(basis, n)?;
    let tensor = &en * psi;
    let mut blocks: Vec<Vec<CMat>> = (0..=basis.max_particles())
        .map(|a| (0..=basis.max_particles()).map(|b| CMat::zeros(basis.sector_dim(a), basis.sector_dim(b))).collect())
        .collect();
    for k in 0..=n {
        let ops: Vec<&CMat> = (0..n).map(|i| if i < k { loc.b() } else { loc.complement() }).collect();
        let w = apply_factorwise(&tensor, &ops, r);
        let (rk, rest) = (r.pow(k as u32), r.pow((n - k) as u32));
        let m = CMat::from_fn(rk, rest, |a, s| w[a * rest + s]);
        let ek = crate::fock::tensor_embedding(basis, k)?;
        let proj = ek.adjoint() * m;
        blocks[k][k] = &proj * proj.adjoint() * c(binomial(n, k));
    }
    let parent = MixedState::nbody(basis, n, psi)?;
    let result = MixedState::from_blocks(basis, blocks)?;
    Ok(LocalizedDecomposition::new(&parent, loc, result))
}

/// Rotates orthonormal orbitals (columns of `phi`) so that `⟨Bφ_i, Bφ_j⟩`
/// becomes diagonal; returns the rotated orbitals and `‖Bφ_i‖²`.
pub fn gauge_fix(phi: &CMat, loc: &LocalizationOperator) -> (CMat, Vec<f64>) {
    let bp = loc.b() * phi;
    let gram = bp.adjoint() * &bp;
    let (vals, u) = eigh(&gram);
    (phi * u, vals.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Closed form for a Slater determinant `φ_1∧⋯∧φ_N`:
/// `G_k^B = Σ_{|I|=k} ∏_{α∉I} (1−‖Bφ_α‖²) |Bφ_I⟩⟨Bφ_I|` in the gauge where
/// the `Bφ_i` are orthogonal.
pub fn localize_slater(basis: &FockBasis, orbitals: &CMat, loc: &LocalizationOperator) -> Result<LocalizedDecomposition> {
    if basis.statistics() != Statistics::Fermion {
        return Err(Error::StatisticsMismatch("Slater determinants are fermionic".into()));
    }
    check_localizer(basis, loc)?;
    let n = orbitals.ncols();
    basis.check_sector(n)?;
    let gram_dev = (orbitals.adjoint() * orbitals - CMat::identity(n, n)).norm();
    if gram_dev > 1e-10 {
        return invalid(format!("orbitals are not orthonormal (deviation {gram_dev:e})"));
    }
    let (phi, beta) = gauge_fix(orbitals, loc);
    let bphi = loc.b() * &phi;
    let mut blocks: Vec<Vec<CMat>> = (0..=basis.max_particles())
        .map(|a| (0..=basis.max_particles()).map(|b| CMat::zeros(basis.sector_dim(a), basis.sector_dim(b))).collect())
        .collect();
    let orbital_space = FockBasis::new(n, n, Statistics::Fermion)?;
    for k in 0..=n {
        for subset in orbital_space.sector(k) {
            let weight: f64 = (0..n).filter(|a| !subset.contains(a)).map(|a| 1.0 - beta[a]).product();
            if weight == 0.0 {
                continue;
            }
            let cols: Vec<CVec> = subset.iter().map(|&i| bphi.column(i).into_owned()).collect();
            let v = product_state(basis, &cols)?;
            blocks[k][k] += &v * v.adjoint() * c(weight);
        }
    }
    let psi = product_state(basis, &(0..n).map(|i| orbitals.column(i).into_owned()).collect::<Vec<_>>())?;
    let parent = MixedState::nbody(basis, n, &psi)?;
    let result = MixedState::from_blocks(basis, blocks)?;
    Ok(LocalizedDecomposition::new(&parent, loc, result))
}

/// `max_k |tr G_k^B − tr G_{N−k}^{C}|` for an `N`-body state, where `C` is the
/// complementary localizer.
pub fn trace_complementarity_check(basis: &FockBasis, state: &MixedState, n: usize, loc: &LocalizationOperator) -> Result<f64> {
    let weights = state.sector_weights();
    if weights.iter().enumerate().any(|(m, w)| m != n && w.abs() > 1e-12) {
        return invalid(format!("state is not an {n}-body state"));
    }
    let wb = localize_via_formula(basis, state, loc)?.sector_weights();
    let wc = localize_via_formula(basis, state, &loc.complement_localizer())?.sector_weights();
    Ok((0..=n).map(|k| (wb[k] - wc[n - k]).abs()).fold(0.0, f64::max))
}

/// Blockwise deviation between `(Γ_{B1})_{B2}` and `Γ_{B2 B1}`.
pub fn composition_check(
    basis: &FockBasis,
    state: &MixedState,
    b1: &LocalizationOperator,
    b2: &LocalizationOperator,
) -> Result<f64> {
    let twice = localize_via_formula(basis, &localize_via_formula(basis, state, b1)?, b2)?;
    let once = localize_via_formula(basis, state, &b2.after(b1)?)?;
    Ok(twice.max_block_deviation(&once))
}

/// Per-sector certificate for the finite-rank localization structure.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorCertificate {
    pub k: usize,
    pub weight: f64,
    /// Rank bound `R − N + k` (clamped at zero), `R` the rank of the input.
    pub bound: usize,
    /// Largest one-body rank among the decomposition components.
    pub certified_rank: usize,
    /// Number of nonzero components in the decomposition.
    pub components: usize,
    /// `‖Σ_L |Ψ_L⟩⟨Ψ_L| − G_k^B‖` (max entry).
    pub reconstruction_error: f64,
    /// Largest one-body rank among eigenvectors of `G_k^B` (informational).
    pub eigen_rank: usize,
}

impl SectorCertificate {
    pub fn holds(&self) -> bool {
        self.certified_rank <= self.bound && self.reconstruction_error <= 1e-10
    }
}

#[derive(Debug, Clone)]
pub struct RankCertificate {
    pub input_rank: usize,
    pub sectors: Vec<SectorCertificate>,
}

impl RankCertificate {
    pub fn holds(&self) -> bool {
        self.sectors.iter().all(SectorCertificate::holds)
    }
}

fn onebody_rank(basis: &FockBasis, k: usize, v: &CVec) -> Result<usize> {
    if k == 0 {
        return Ok(0);
    }
    let norm = v.norm();
    let s = MixedState::nbody(basis, k, &(v / c(norm)))?;
    let (occ, _) = natural_orbitals(basis, &s)?;
    Ok(occ.iter().filter(|&&x| x > RANK_THRESHOLD).count())
}

/// Certifies that every `G_k^B` of a fermionic `N`-body pure state of rank
/// `R` is a sum of `k`-body states of one-body rank `≤ R − N + k`.
///
/// The decomposition is built constructively: in natural orbitals rotated
/// so that `⟨Bφ_i, Bφ_j⟩ = δ_ij β_i`, the map `φ_i ↦ Bφ_i ⊕ √(1−β_i) e_i` is an
/// isometry into `h ⊕ C^R`; fixing the occupied auxiliary modes `L` gives the
/// components `Ψ_L`, each built from the orbitals `Bφ_i, i ∉ L`.
pub fn finite_rank_localization_structure(
    basis: &FockBasis,
    n: usize,
    psi: &CVec,
    loc: &LocalizationOperator,
) -> Result<RankCertificate> {
    if basis.statistics() != Statistics::Fermion {
        return Err(Error::StatisticsMismatch("the rank structure holds for fermions only".into()));
    }
    check_localizer(basis, loc)?;
    let parent = MixedState::nbody(basis, n, psi)?;
    let (occ, nat) = natural_orbitals(basis, &parent)?;
    let rank = occ.iter().filter(|&&x| x > RANK_THRESHOLD).count();
    let support = nat.columns(0, rank).into_owned();
    let (phi, beta) = gauge_fix(&support, loc);
    let small = FockBasis::new(rank, n, Statistics::Fermion)?;
    let coefs = lift_isometry(basis, &small, &phi, n)?.adjoint() * psi;

    let r = basis.modes();
    let doubled = FockBasis::new(r + rank, n, Statistics::Fermion)?;
    let mut w = CMat::zeros(r + rank, rank);
    w.view_mut((0, 0), (r, rank)).copy_from(&(loc.b() * &phi));
    for (i, b) in beta.iter().enumerate() {
        w[(r + i, i)] = c((1.0 - b).max(0.0).sqrt());
    }
    let lifted = lift_isometry(&doubled, &small, &w, n)? * coefs;

    let mut components: Vec<std::collections::BTreeMap<Vec<usize>, CVec>> = vec![Default::default(); n + 1];
    for (idx, t) in doubled.sector(n).iter().enumerate() {
        let amp = lifted[idx];
        if amp == C64::new(0.0, 0.0) {
            continue;
        }
        let (t1, t2) = split_tuple(t, r);
        let k = t1.len();
        let entry = components[k].entry(t2).or_insert_with(|| CVec::zeros(basis.sector_dim(k)));
        entry[basis.index_of(&t1).unwrap()] += amp;
    }

    let localized = localize_via_formula(basis, &parent, loc)?;
    let mut sectors = Vec::with_capacity(n + 1);
    for (k, comps) in components.iter().enumerate() {
        let gk = localized.block(k, k);
        let mut sum = CMat::zeros(gk.nrows(), gk.ncols());
        let mut certified = 0;
        let mut count = 0;
        for v in comps.values() {
            if v.norm() <= 1e-12 {
                continue;
            }
            sum += v * v.adjoint();
            certified = certified.max(onebody_rank(basis, k, v)?);
            count += 1;
        }
        let (vals, vecs) = eigh(gk);
        let mut eigen_rank = 0;
        for (i, &val) in vals.iter().enumerate() {
            if val > 1e-12 {
                eigen_rank = eigen_rank.max(onebody_rank(basis, k, &vecs.column(i).into_owned())?);
            }
        }
        sectors.push(SectorCertificate {
            k,
            weight: crate::linalg::trace(gk).re,
            bound: (rank + k).saturating_sub(n),
            certified_rank: certified,
            components: count,
            reconstruction_error: (sum - gk).iter().map(|z| z.norm()).fold(0.0, f64::max),
            eigen_rank,
        });
    }
    Ok(RankCertificate { input_rank: rank, sectors })
}

/// CSV export `sector,weight,certified_rank` (rank column left empty when unknown).
pub fn write_localization_csv(weights: &[f64], ranks: Option<&[usize]>, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["sector", "weight", "certified_rank"])?;
    for (k, wt) in weights.iter().enumerate() {
        let rank = ranks.and_then(|r| r.get(k)).map(|r| r.to_string()).unwrap_or_default();
        out.write_record([k.to_string(), format!("{wt:.16e}"), rank])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{embed_sector, unit};
    use crate::onebody::{window_localizer, OneBodySpace};
    use crate::random;
    use crate::states::{average_particle_number, random_nbody, random_state};

    fn random_localizer<R: rand::Rng>(rng: &mut R, r: usize) -> LocalizationOperator {
        let scale = random::uniform(rng, 0.3, 1.0);
        LocalizationOperator::new(random::contraction(rng, r, scale)).unwrap()
    }

    #[test]
    fn identity_and_zero() {
        let mut rng = random::rng(1);
        let b = FockBasis::new(3, 2, Statistics::Fermion).unwrap();
        let s = random_state(&mut rng, &b, 3);
        let same = localize_via_formula(&b, &s, &LocalizationOperator::identity(3)).unwrap();
        assert!(same.max_block_deviation(&s) < 1e-12);
        let vac = localize_via_formula(&b, &s, &LocalizationOperator::zero(3)).unwrap();
        assert!(vac.max_block_deviation(&MixedState::vacuum(&b)) < 1e-12);
    }

    #[test]
    fn one_body_window() {
        let space = OneBodySpace::lattice(1, 4, 4.0).unwrap();
        let b = FockBasis::new(4, 1, Statistics::Fermion).unwrap();
        let phi = CVec::from_vec(vec![c(0.5), c(0.5), c(0.5), c(0.5)]);
        let chi = window_localizer(&space, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let out = localize_via_formula(&b, &MixedState::nbody(&b, 1, &phi).unwrap(), &chi).unwrap();
        let cphi = chi.b() * &phi;
        assert!((out.block(0, 0)[(0, 0)] - c(1.0 - cphi.norm_squared())).norm() < 1e-14);
        assert!((out.block(1, 1) - &cphi * cphi.adjoint()).norm() < 1e-14);
    }

    #[test]
    fn doubling_oracle_agrees() {
        let mut rng = random::rng(2);
        for stats in [Statistics::Fermion, Statistics::Boson] {
            for (r, n) in [(2, 2), (3, 2), (4, 3)] {
                let b = FockBasis::new(r, n, stats).unwrap();
                let s = random_state(&mut rng, &b, 3);
                let loc = random_localizer(&mut rng, r);
                let f = localize_via_formula(&b, &s, &loc).unwrap();
                let d = localize_via_doubling(&b, &s, &loc).unwrap();
                assert!(f.max_block_deviation(&d) < 1e-9, "{stats:?} r={r} N={n}");
            }
        }
    }

    #[test]
    fn unitary_localization_is_conjugation() {
        let mut rng = random::rng(3);
        let b = FockBasis::new(3, 2, Statistics::Boson).unwrap();
        let s = random_state(&mut rng, &b, 2);
        let u = random::unitary(&mut rng, 3);
        let out = localize_via_doubling(&b, &s, &LocalizationOperator::new(u.clone()).unwrap()).unwrap();
        let lifts = lift_onebody(&b, &u).unwrap();
        for m in 0..=2 {
            for n in 0..=2 {
                let expect = &lifts[m] * s.block(m, n) * lifts[n].adjoint();
                assert!((out.block(m, n) - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hartree_binomial_weights() {
        let mut rng = random::rng(4);
        for n in 1..=4 {
            let b = FockBasis::new(3, n, Statistics::Boson).unwrap();
            let phi = random::unit_vector(&mut rng, 3);
            let orbitals = vec![phi.clone(); n];
            let psi = product_state(&b, &orbitals).unwrap();
            let psi = &psi / c(psi.norm());
            let loc = random_localizer(&mut rng, 3);
            let s = MixedState::nbody(&b, n, &psi).unwrap();
            let out = localize_via_formula(&b, &s, &loc).unwrap();
            let x = (loc.b() * &phi).norm_squared();
            for k in 0..=n {
                let expect = binomial(n, k) * (1.0 - x).powi((n - k) as i32) * x.powi(k as i32);
                assert!((out.sector_weights()[k] - expect).abs() < 1e-10);
                // rank one with vector (Bφ)^{⊗k}
                let bphi = loc.b() * &phi;
                let v = product_state(&b, &vec![bphi; k]).unwrap();
                let kf: f64 = (1..=k).map(|j| j as f64).product();
                let g = &v * v.adjoint() * c(binomial(n, k) * (1.0 - x).powi((n - k) as i32) / kf);
                assert!((out.block(k, k) - g).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn nbody_and_slater_routes() {
        let mut rng = random::rng(5);
        let b = FockBasis::new(4, 3, Statistics::Fermion).unwrap();
        let frame = random::frame(&mut rng, 4, 2);
        let loc = random_localizer(&mut rng, 4);
        let psi = product_state(&b, &[frame.column(0).into_owned(), frame.column(1).into_owned()]).unwrap();
        let formula = localize_via_formula(&b, &MixedState::nbody(&b, 2, &psi).unwrap(), &loc).unwrap();
        let nbody = localize_nbody(&b, 2, &psi, &loc).unwrap();
        let slater = localize_slater(&b, &frame, &loc).unwrap();
        assert!(nbody.result.max_block_deviation(&formula) < 1e-10);
        assert!(slater.result.max_block_deviation(&formula) < 1e-10);
        let psi3 = random_nbody(&mut rng, &b, 3);
        let f3 = localize_via_formula(&b, &MixedState::nbody(&b, 3, &psi3).unwrap(), &loc).unwrap();
        assert!(localize_nbody(&b, 3, &psi3, &loc).unwrap().result.max_block_deviation(&f3) < 1e-10);
        let id = localize_nbody(&b, 3, &psi3, &LocalizationOperator::identity(4)).unwrap();
        assert!((id.sector_weights[3] - 1.0).abs() < 1e-12);
        assert!(id.result.max_block_deviation(&MixedState::nbody(&b, 3, &psi3).unwrap()) < 1e-12);
    }

    #[test]
    fn slater_half_weights() {
        let space = OneBodySpace::lattice(1, 4, 4.0).unwrap();
        let b = FockBasis::new(4, 2, Statistics::Fermion).unwrap();
        // φ1 inside the window, φ2 half inside
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = CMat::from_row_slice(4, 2, &[c(1.0), c(0.0), c(0.0), c(s), c(0.0), c(0.0), c(0.0), c(s)]);
        let chi = window_localizer(&space, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        let dec = localize_slater(&b, &phi, &chi).unwrap();
        let w = dec.sector_weights;
        assert!(w[0].abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14 && (w[2] - 0.5).abs() < 1e-14);
        let psi = product_state(&b, &[phi.column(0).into_owned(), phi.column(1).into_owned()]).unwrap();
        let st = MixedState::nbody(&b, 2, &psi).unwrap();
        let wc = localize_via_formula(&b, &st, &chi.complement_localizer()).unwrap().sector_weights();
        assert!((wc[0] - 0.5).abs() < 1e-14 && (wc[1] - 0.5).abs() < 1e-14 && wc[2].abs() < 1e-14);
        assert!(trace_complementarity_check(&b, &st, 2, &chi).unwrap() < 1e-12);
    }

    #[test]
    fn complementarity_and_composition() {
        let mut rng = random::rng(6);
        let b = FockBasis::new(4, 3, Statistics::Boson).unwrap();
        for _ in 0..5 {
            let psi = random_nbody(&mut rng, &b, 3);
            let s = MixedState::nbody(&b, 3, &psi).unwrap();
            let loc = random_localizer(&mut rng, 4);
            assert!(trace_complementarity_check(&b, &s, 3, &loc).unwrap() <= 1e-10);
            let l2 = random_localizer(&mut rng, 4);
            assert!(composition_check(&b, &s, &loc, &l2).unwrap() <= 1e-10);
        }
        let s = MixedState::nbody(&b, 3, &random_nbody(&mut rng, &b, 3)).unwrap();
        let zero = LocalizationOperator::zero(4);
        assert!(trace_complementarity_check(&b, &s, 3, &zero).unwrap() < 1e-12);
        let frame = random::frame(&mut rng, 4, 2);
        let p = LocalizationOperator::new(&frame * frame.adjoint()).unwrap();
        assert!(composition_check(&b, &s, &p, &p).unwrap() < 1e-10);
        let gp = localize_via_formula(&b, &s, &p).unwrap();
        assert!(localize_via_formula(&b, &gp, &p).unwrap().max_block_deviation(&gp) < 1e-10);
    }

    #[test]
    fn particle_number_never_increases() {
        let mut rng = random::rng(7);
        let b = FockBasis::new(3, 3, Statistics::Fermion).unwrap();
        for _ in 0..5 {
            let s = random_state(&mut rng, &b, 4);
            let loc = random_localizer(&mut rng, 3);
            let out = localize_via_formula(&b, &s, &loc).unwrap();
            assert!(average_particle_number(&b, &out).unwrap() <= average_particle_number(&b, &s).unwrap() + 1e-10);
        }
    }

    #[test]
    fn rank_structure() {
        let mut rng = random::rng(8);
        let b = FockBasis::new(6, 3, Statistics::Fermion).unwrap();
        let frame = random::frame(&mut rng, 6, 4);
        let small = FockBasis::new(4, 2, Statistics::Fermion).unwrap();
        let psi = lift_isometry(&b, &small, &frame, 2).unwrap() * random::unit_vector(&mut rng, 6);
        let loc = random_localizer(&mut rng, 6);
        let cert = finite_rank_localization_structure(&b, 2, &psi, &loc).unwrap();
        assert_eq!(cert.input_rank, 4);
        assert!(cert.holds(), "{cert:?}");
        assert!(cert.sectors[1].certified_rank <= 3);
        let slater = product_state(&b, &(0..3).map(|i| frame.column(i).into_owned()).collect::<Vec<_>>()).unwrap();
        let cert = finite_rank_localization_structure(&b, 3, &slater, &loc).unwrap();
        assert!(cert.holds());
        for s in &cert.sectors {
            assert!(s.certified_rank <= s.k);
        }
        let cert = finite_rank_localization_structure(&b, 2, &psi, &LocalizationOperator::identity(6)).unwrap();
        assert!(cert.holds());
        assert!(cert.sectors[0].weight.abs() < 1e-12 && cert.sectors[1].weight.abs() < 1e-12);
        let bb = FockBasis::new(3, 2, Statistics::Boson).unwrap();
        assert!(finite_rank_localization_structure(&bb, 1, &unit(3, 0), &LocalizationOperator::identity(3)).is_err());
    }

    #[test]
    fn strong_approximation_by_projectors() {
        let mut rng = random::rng(9);
        let b = FockBasis::new(4, 2, Statistics::Fermion).unwrap();
        let s = random_state(&mut rng, &b, 3);
        let mut prev = f64::INFINITY;
        for j in 0..=4 {
            let mut p = CMat::zeros(4, 4);
            for i in 0..j {
                p[(i, i)] = c(1.0);
            }
            let out = localize_via_formula(&b, &s, &LocalizationOperator::new(p).unwrap()).unwrap();
            let d = out.trace_distance(&s);
            assert!(d <= prev + 1e-12);
            prev = d;
        }
        assert!(prev < 1e-10);
        let _ = embed_sector(&b, 0, &CVec::from_element(1, c(1.0))).unwrap();
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_localization_csv(&[0.0, 0.5, 0.5], Some(&[0, 1, 2]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2).unwrap(), "1,5.0000000000000000e-1,1");
    }
}
