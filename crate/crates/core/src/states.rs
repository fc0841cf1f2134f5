//! Mixed states on `F^{≤N}`, their `(p,q)` density matrices, the inverse
//! map from density matrices back to blocks, representability and Löwdin
//! (natural-orbital) analysis.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{insert_mode, lift_isometry, FockBasis, Statistics};
use crate::linalg::{binomial, c, eigh, hermiticity_deviation, trace, trace_norm, CMat, CVec, C64};
use crate::onebody::OneBodySpace;

/// Smallest eigenvalue a state may have.
pub const PSD_TOLERANCE: f64 = 1e-10;
/// Allowed deviation of the trace from one.
pub const TRACE_TOLERANCE: f64 = 1e-12;
/// Occupation numbers below this count as zero when computing ranks.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Hermitian, positive, trace-one operator on `F^{≤N}`, stored as the blocks
/// `G_{mn} = Π_m Γ Π_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    modes: usize,
    n_max: usize,
    statistics: Statistics,
    blocks: Vec<Vec<CMat>>,
}

impl MixedState {
    /// Validated state from its blocks (`blocks[m][n]` is sector `m` × sector `n`).
    pub fn from_blocks(basis: &FockBasis, blocks: Vec<Vec<CMat>>) -> Result<Self> {
        let state = Self::from_blocks_unchecked(basis, blocks)?;
        state.validate()?;
        Ok(state)
    }

    /// Shape-checked but otherwise unvalidated operator (used for
    /// intermediate results and for density-matrix algebra on non-states).
    pub fn from_blocks_unchecked(basis: &FockBasis, blocks: Vec<Vec<CMat>>) -> Result<Self> {
        let n_max = basis.max_particles();
        if blocks.len() != n_max + 1 || blocks.iter().any(|row| row.len() != n_max + 1) {
            return invalid(format!("expected {}x{} blocks", n_max + 1, n_max + 1));
        }
        for (m, row) in blocks.iter().enumerate() {
            for (n, b) in row.iter().enumerate() {
                if b.shape() != (basis.sector_dim(m), basis.sector_dim(n)) {
                    return invalid(format!(
                        "block ({m},{n}) has shape {:?}, expected {:?}",
                        b.shape(),
                        (basis.sector_dim(m), basis.sector_dim(n))
                    ));
                }
            }
        }
        Ok(Self { modes: basis.modes(), n_max, statistics: basis.statistics(), blocks })
    }

    pub fn from_matrix(basis: &FockBasis, m: &CMat) -> Result<Self> {
        if m.shape() != (basis.dim(), basis.dim()) {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: m.nrows() });
        }
        let blocks = (0..=basis.max_particles())
            .map(|a| {
                (0..=basis.max_particles())
                    .map(|b| {
                        let (ra, rb) = (basis.sector_range(a), basis.sector_range(b));
                        m.view((ra.start, rb.start), (ra.len(), rb.len())).into_owned()
                    })
                    .collect()
            })
            .collect();
        Self::from_blocks(basis, blocks)
    }

    pub fn zero(basis: &FockBasis) -> Self {
        let n = basis.max_particles();
        let blocks = (0..=n)
            .map(|a| (0..=n).map(|b| CMat::zeros(basis.sector_dim(a), basis.sector_dim(b))).collect())
            .collect();
        Self { modes: basis.modes(), n_max: n, statistics: basis.statistics(), blocks }
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        let mut s = Self::zero(basis);
        s.blocks[0][0][(0, 0)] = c(1.0);
        s
    }

    /// `|Ψ⟩⟨Ψ|` for a Fock vector `Ψ`; renormalized after the norm check.
    pub fn pure(basis: &FockBasis, psi: &CVec) -> Result<Self> {
        if psi.len() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), found: psi.len() });
        }
        let norm = psi.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::NotNormalized { norm });
        }
        let psi = psi / c(norm);
        let parts: Vec<CVec> =
            (0..=basis.max_particles()).map(|n| crate::fock::sector_part(basis, n, &psi)).collect();
        let blocks = parts.iter().map(|a| parts.iter().map(|b| a * b.adjoint()).collect()).collect();
        Ok(Self { modes: basis.modes(), n_max: basis.max_particles(), statistics: basis.statistics(), blocks })
    }

    /// Pure `n`-body state `|ψ⟩⟨ψ|` with `ψ` a sector-`n` vector.
    pub fn nbody(basis: &FockBasis, n: usize, psi: &CVec) -> Result<Self> {
        Self::pure(basis, &crate::fock::embed_sector(basis, n, psi)?)
    }

    /// `n`-body state with the given sector density matrix `G` (trace one).
    pub fn nbody_mixed(basis: &FockBasis, n: usize, g: CMat) -> Result<Self> {
        basis.check_sector(n)?;
        let mut s = Self::zero(basis);
        if g.shape() != s.blocks[n][n].shape() {
            return Err(Error::DimensionMismatch { expected: basis.sector_dim(n), found: g.nrows() });
        }
        s.blocks[n][n] = g;
        s.validate()?;
        Ok(s)
    }

    /// Convex combination `Σ w_i Γ_i`.
    pub fn mixture(basis: &FockBasis, parts: &[(f64, &MixedState)]) -> Result<Self> {
        let mut out = Self::zero(basis);
        for (w, s) in parts {
            if *w < 0.0 {
                return invalid("mixture weights must be nonnegative");
            }
            out.check_compatible(s)?;
            for (m, row) in s.blocks.iter().enumerate() {
                for (n, b) in row.iter().enumerate() {
                    out.blocks[m][n] += b * c(*w);
                }
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_particles(&self) -> usize {
        self.n_max
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn block(&self, m: usize, n: usize) -> &CMat {
        &self.blocks[m][n]
    }

    pub fn blocks(&self) -> &[Vec<CMat>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Vec<CMat>> {
        self.blocks
    }

    pub(crate) fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        if basis.modes() != self.modes || basis.max_particles() != self.n_max || basis.statistics() != self.statistics {
            return invalid(format!(
                "state lives on ({} modes, N={}, {:?}) but basis is ({} modes, N={}, {:?})",
                self.modes,
                self.n_max,
                self.statistics,
                basis.modes(),
                basis.max_particles(),
                basis.statistics()
            ));
        }
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if (self.modes, self.n_max, self.statistics) != (other.modes, other.n_max, other.statistics) {
            return invalid("states live on different Fock spaces");
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> CMat {
        let dims: Vec<usize> = self.blocks.iter().map(|row| row[0].nrows()).collect();
        let offsets: Vec<usize> = dims.iter().scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        }).collect();
        let total = dims.iter().sum();
        let mut m = CMat::zeros(total, total);
        for (a, row) in self.blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                m.view_mut((offsets[a], offsets[b]), blk.shape()).copy_from(blk);
            }
        }
        m
    }

    pub fn trace(&self) -> f64 {
        (0..=self.n_max).map(|m| trace(&self.blocks[m][m]).re).sum()
    }

    /// Weights `tr G_{kk}` of the particle-number sectors.
    pub fn sector_weights(&self) -> Vec<f64> {
        (0..=self.n_max).map(|m| trace(&self.blocks[m][m]).re).collect()
    }

    pub fn is_number_conserving(&self, tol: f64) -> bool {
        self.blocks
            .iter()
            .enumerate()
            .all(|(m, row)| row.iter().enumerate().all(|(n, b)| m == n || b.iter().all(|z| z.norm() <= tol)))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for m in 0..=self.n_max {
            for n in m..=self.n_max {
                let d = (&self.blocks[m][n] - self.blocks[n][m].adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                dev = dev.max(d);
            }
        }
        dev
    }

    /// Smallest eigenvalue, computed sector-wise when the state commutes with `𝒩`.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.is_number_conserving(0.0) {
            (0..=self.n_max)
                .filter(|&m| self.blocks[m][m].nrows() > 0)
                .map(|m| {
                    let b = &self.blocks[m][m];
                    if b.iter().all(|z| z.norm() == 0.0) {
                        0.0
                    } else {
                        crate::linalg::min_eigenvalue(b)
                    }
                })
                .fold(f64::INFINITY, f64::min)
        } else {
            crate::linalg::min_eigenvalue(&self.to_matrix())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let scale = self.blocks.iter().flatten().flat_map(|b| b.iter()).map(|z| z.norm()).fold(1.0, f64::max);
        let dev = self.hermiticity_deviation();
        if dev > 1e-12 * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOLERANCE {
            return Err(Error::BadTrace { trace: tr });
        }
        let min = self.min_eigenvalue();
        if min < -PSD_TOLERANCE {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
        Ok(())
    }

    /// Largest entrywise deviation between two states.
    pub fn max_block_deviation(&self, other: &Self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .zip(other.blocks.iter().flatten())
            .map(|(a, b)| (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// `‖Γ − Γ'‖_1`, sector-wise when both states commute with `𝒩`.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        if self.is_number_conserving(0.0) && other.is_number_conserving(0.0) {
            return (0..=self.n_max).map(|m| trace_norm(&(&self.blocks[m][m] - &other.blocks[m][m]))).sum();
        }
        trace_norm(&(self.to_matrix() - other.to_matrix()))
    }
}

/// `[Γ]^{(p,q)}`, mapping sector `q` to sector `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub p: usize,
    pub q: usize,
    #[serde(skip)]
    pub matrix: CMat,
}

impl DensityMatrix {
    pub fn trace_norm(&self) -> f64 {
        trace_norm(&self.matrix)
    }
}

/// Trace-norm bound `Σ_j √(C(p+j,p) C(q+j,q))` for states on `F^{≤N}`.
pub fn density_matrix_bound(n_max: usize, p: usize, q: usize) -> f64 {
    if p > n_max || q > n_max {
        return 0.0;
    }
    (0..=(n_max - p).min(n_max - q)).map(|j| (binomial(p + j, p) * binomial(q + j, q)).sqrt()).sum()
}

/// `κ(a, t) = ⟨a⊕t| C†_a |t⟩` where `C†_a |Ω⟩ = |a⟩`.
fn kappa(stats: Statistics, a: &[usize], t: &[usize], basis: &FockBasis) -> Option<(Vec<usize>, f64)> {
    let mut cur = t.to_vec();
    let mut coef = 1.0;
    for &i in a.iter().rev() {
        let (next, s) = insert_mode(stats, &cur, i)?;
        cur = next;
        coef *= s;
    }
    Some((cur, coef / basis.product_norm(a)))
}

/// Pairs `(index of a in sector p, index of a⊕t in sector p+j, κ(a,t))`
/// grouped by the spectator tuple `t` of sector `j`.
fn spectator_table(basis: &FockBasis, p: usize, j: usize) -> Vec<Vec<(usize, usize, f64)>> {
    let stats = basis.statistics();
    basis
        .sector(j)
        .iter()
        .map(|t| {
            basis
                .sector(p)
                .iter()
                .enumerate()
                .filter_map(|(ai, a)| {
                    let (u, k) = kappa(stats, a, t, basis)?;
                    Some((ai, basis.index_of(&u).unwrap(), k))
                })
                .collect()
        })
        .collect()
}

/// `[X]^{(p,q)}` for an operator `X` from sector `n` to sector `m`
/// (nonzero only when `m − p = n − q ≥ 0`), computed from the ladder-operator
/// definition `⟨a|[X]^{(p,q)}|b⟩ = tr(X C†_b C_a)`.
pub fn reduce(basis: &FockBasis, x: &CMat, m: usize, n: usize, p: usize, q: usize) -> CMat {
    let mut out = CMat::zeros(basis.sector_dim(p), basis.sector_dim(q));
    if m < p || n < q || m - p != n - q {
        return out;
    }
    let j = m - p;
    let left = spectator_table(basis, p, j);
    let right = if p == q { left.clone() } else { spectator_table(basis, q, j) };
    for (lt, rt) in left.iter().zip(&right) {
        for &(a, u, ka) in lt {
            for &(b, v, kb) in rt {
                out[(a, b)] += x[(u, v)] * (ka * kb);
            }
        }
    }
    out
}

/// `[Γ]^{(p,q)} = Σ_j [G_{p+j,q+j}]^{(p,q)}`.
pub fn density_matrix(basis: &FockBasis, state: &MixedState, p: usize, q: usize) -> Result<DensityMatrix> {
    state.check_basis(basis)?;
    let n_max = basis.max_particles();
    if p > n_max || q > n_max {
        return Err(Error::ParticleOverflow { requested: p.max(q), max: n_max });
    }
    let mut out = CMat::zeros(basis.sector_dim(p), basis.sector_dim(q));
    for j in 0..=(n_max - p).min(n_max - q) {
        let blk = state.block(p + j, q + j);
        if blk.iter().any(|z| z.norm() > 0.0) {
            out += reduce(basis, blk, p + j, q + j, p, q);
        }
    }
    Ok(DensityMatrix { p, q, matrix: out })
}

/// Partial-trace route: embed `G_{mn}` into `h^{⊗m} ⊗ (h^{⊗n})*`, trace out the
/// last `j` variables with the prefactor `√(C(m,p) C(n,q))`, and project back.
pub fn density_matrix_partial_trace(basis: &FockBasis, state: &MixedState, p: usize, q: usize) -> Result<DensityMatrix> {
    state.check_basis(basis)?;
    let n_max = basis.max_particles();
    if p > n_max || q > n_max {
        return Err(Error::ParticleOverflow { requested: p.max(q), max: n_max });
    }
    let r = basis.modes();
    let ep = crate::fock::tensor_embedding(basis, p)?;
    let eq = crate::fock::tensor_embedding(basis, q)?;
    let mut out = CMat::zeros(basis.sector_dim(p), basis.sector_dim(q));
    for j in 0..=(n_max - p).min(n_max - q) {
        let (m, n) = (p + j, q + j);
        let em = crate::fock::tensor_embedding(basis, m)?;
        let en = crate::fock::tensor_embedding(basis, n)?;
        let g = &em * state.block(m, n) * en.adjoint();
        let rj = r.pow(j as u32);
        let (dp, dq) = (r.pow(p as u32), r.pow(q as u32));
        let mut y = CMat::zeros(dp, dq);
        for a in 0..dp {
            for b in 0..dq {
                let mut acc = C64::new(0.0, 0.0);
                for s in 0..rj {
                    acc += g[(a * rj + s, b * rj + s)];
                }
                y[(a, b)] = acc;
            }
        }
        let pref = (binomial(m, p) * binomial(n, q)).sqrt();
        out += ep.adjoint() * y * &eq * c(pref);
    }
    Ok(DensityMatrix { p, q, matrix: out })
}

/// All density matrices `table[p][q] = [Γ]^{(p,q)}`.
pub fn density_matrix_table(basis: &FockBasis, state: &MixedState) -> Result<Vec<Vec<CMat>>> {
    let n = basis.max_particles();
    (0..=n).map(|p| (0..=n).map(|q| Ok(density_matrix(basis, state, p, q)?.matrix)).collect()).collect()
}

/// Inverse of the triangular system:
/// `G_{mn} = [Γ]^{(m,n)} + Σ_{j≥1} (−1)^j [[Γ]^{(m+j,n+j)}]^{(m,n)}`.
/// The result is shape-checked but not validated as a state.
pub fn blocks_from_density_matrices(basis: &FockBasis, table: &[Vec<CMat>]) -> Result<MixedState> {
    let n_max = basis.max_particles();
    for p in 0..=n_max {
        for q in 0..=n_max {
            let ok = table.get(p).and_then(|row| row.get(q)).is_some_and(|m| {
                m.shape() == (basis.sector_dim(p), basis.sector_dim(q))
            });
            if !ok {
                return Err(Error::IncompleteTable { p, q });
            }
        }
    }
    let mut blocks = vec![vec![CMat::zeros(0, 0); n_max + 1]; n_max + 1];
    for m in 0..=n_max {
        for n in 0..=n_max {
            let mut g = table[m][n].clone();
            for j in 1..=(n_max - m).min(n_max - n) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                g += reduce(basis, &table[m + j][n + j], m + j, n + j, m, n) * c(sign);
            }
            blocks[m][n] = g;
        }
    }
    MixedState::from_blocks_unchecked(basis, blocks)
}

/// Outcome of the representability test for a diagonal table `Υ^0..Υ^N`.
#[derive(Debug, Clone)]
pub enum Representability {
    /// The number-conserving state with the prescribed diagonal density matrices.
    Representable(MixedState),
    /// Sector whose alternating sum fails to be positive, with its lowest eigenvalue.
    Violated { sector: usize, min_eigenvalue: f64 },
}

impl Representability {
    pub fn is_representable(&self) -> bool {
        matches!(self, Representability::Representable(_))
    }
}

/// Checks `Υ^0 = 1` and `Υ^m + Σ_{j>m} (−1)^{j+m} C(j,m) tr_{m+1→j} Υ^j ≥ 0`.
pub fn is_representable(basis: &FockBasis, upsilon: &[CMat]) -> Result<Representability> {
    let n_max = basis.max_particles();
    if upsilon.len() != n_max + 1 {
        return invalid(format!("expected {} diagonal density matrices, got {}", n_max + 1, upsilon.len()));
    }
    for (m, u) in upsilon.iter().enumerate() {
        if u.shape() != (basis.sector_dim(m), basis.sector_dim(m)) {
            return Err(Error::IncompleteTable { p: m, q: m });
        }
        let dev = hermiticity_deviation(u);
        if dev > 1e-10 {
            return Err(Error::NotHermitian { deviation: dev });
        }
    }
    if (upsilon[0][(0, 0)] - c(1.0)).norm() > 1e-12 {
        return Ok(Representability::Violated { sector: 0, min_eigenvalue: upsilon[0][(0, 0)].re - 1.0 });
    }
    let mut blocks = vec![vec![CMat::zeros(0, 0); n_max + 1]; n_max + 1];
    for m in 0..=n_max {
        let mut g = upsilon[m].clone();
        for j in m + 1..=n_max {
            let sign = if (j - m) % 2 == 0 { 1.0 } else { -1.0 };
            g += reduce(basis, &upsilon[j], j, j, m, m) * c(sign);
        }
        let min = crate::linalg::min_eigenvalue(&g);
        if min < -PSD_TOLERANCE {
            return Ok(Representability::Violated { sector: m, min_eigenvalue: min });
        }
        for n in 0..=n_max {
            blocks[m][n] = if m == n { g.clone() } else { CMat::zeros(basis.sector_dim(m), basis.sector_dim(n)) };
        }
    }
    Ok(Representability::Representable(MixedState::from_blocks(basis, blocks)?))
}

/// Natural orbitals: eigenpairs of `[Γ]^{(1)}`, occupations descending.
pub fn natural_orbitals(basis: &FockBasis, state: &MixedState) -> Result<(Vec<f64>, CMat)> {
    if basis.max_particles() == 0 {
        return Ok((vec![0.0; basis.modes()], CMat::identity(basis.modes(), basis.modes())));
    }
    let g1 = density_matrix(basis, state, 1, 1)?.matrix;
    let (vals, vecs) = eigh(&g1);
    let r = vals.len();
    let occ: Vec<f64> = vals.iter().rev().copied().collect();
    let mut orbitals = CMat::zeros(r, r);
    for k in 0..r {
        orbitals.set_column(k, &vecs.column(r - 1 - k));
    }
    Ok((occ, orbitals))
}

/// Löwdin support of a state: the range of `[Γ]^{(1)}`.
#[derive(Debug, Clone)]
pub struct LowdinSupport {
    pub rank: usize,
    pub projector: CMat,
    /// Orthonormal basis of the support (natural orbitals with nonzero occupation).
    pub orbitals: CMat,
    /// `max |Γ_P − Γ|` over blocks; zero up to roundoff for a genuine support.
    pub localization_deviation: f64,
}

pub fn lowdin_support(basis: &FockBasis, state: &MixedState, threshold: f64) -> Result<LowdinSupport> {
    let (occ, orbs) = natural_orbitals(basis, state)?;
    let rank = occ.iter().filter(|&&n| n > threshold).count();
    let orbitals = orbs.columns(0, rank).into_owned();
    let projector = &orbitals * orbitals.adjoint();
    let loc = crate::onebody::LocalizationOperator::new(projector.clone())?;
    let localized = crate::localization::localize_via_formula(basis, state, &loc)?;
    let localization_deviation = localized.max_block_deviation(state);
    Ok(LowdinSupport { rank, projector, orbitals, localization_deviation })
}

/// Re-expands a sector-`n` vector in the wedge/vee basis built from its
/// first `k` natural orbitals; returns the coefficients and the
/// reconstruction error `‖ψ − Σ c_t Φ_t‖`.
pub fn natural_orbital_expansion(basis: &FockBasis, n: usize, psi: &CVec, k: usize) -> Result<(CVec, f64)> {
    let state = MixedState::nbody(basis, n, psi)?;
    let (_, orbs) = natural_orbitals(basis, &state)?;
    let phi = orbs.columns(0, k).into_owned();
    let small = FockBasis::new(k, n, basis.statistics())?;
    let lifted = lift_isometry(basis, &small, &phi, n)?;
    let coefs = lifted.adjoint() * psi;
    let err = (psi - &lifted * &coefs).norm();
    Ok((coefs, err))
}

/// Particle density `ρ(x) = [Γ]^{(1)}(x,x)` on a position lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub rho: Vec<f64>,
    pub cell_volume: f64,
}

impl DensityProfile {
    /// `Σ ρ h^d`.
    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.cell_volume
    }

    /// Site occupations `ρ h^d`.
    pub fn occupations(&self) -> Vec<f64> {
        self.rho.iter().map(|r| r * self.cell_volume).collect()
    }
}

pub fn density_profile(basis: &FockBasis, state: &MixedState, space: &OneBodySpace) -> Result<DensityProfile> {
    let lat = space.require_lattice()?;
    basis.check_modes(space.dim())?;
    let g1 = if basis.max_particles() == 0 {
        CMat::zeros(space.dim(), space.dim())
    } else {
        density_matrix(basis, state, 1, 1)?.matrix
    };
    let dv = lat.cell_volume();
    Ok(DensityProfile { rho: (0..space.dim()).map(|i| g1[(i, i)].re / dv).collect(), cell_volume: dv })
}

/// `tr(𝒩Γ) = tr[Γ]^{(1)}`.
pub fn average_particle_number(basis: &FockBasis, state: &MixedState) -> Result<f64> {
    if basis.max_particles() == 0 {
        return Ok(0.0);
    }
    Ok(trace(&density_matrix(basis, state, 1, 1)?.matrix).re)
}

/// Text export: a header, then for every nonzero block a line
/// `block m n rows cols` followed by row-major `re im` pairs, one row per line.
pub fn write_state_text(state: &MixedState, mut w: impl Write) -> Result<()> {
    let stats = match state.statistics {
        Statistics::Fermion => "fermion",
        Statistics::Boson => "boson",
    };
    writeln!(w, "# mixed-state modes={} max_particles={} statistics={stats}", state.modes, state.n_max)?;
    for (m, row) in state.blocks.iter().enumerate() {
        for (n, b) in row.iter().enumerate() {
            if b.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            writeln!(w, "block {m} {n} {} {}", b.nrows(), b.ncols())?;
            for i in 0..b.nrows() {
                let mut line = String::new();
                for j in 0..b.ncols() {
                    if j > 0 {
                        line.push(' ');
                    }
                    let _ = write!(line, "{:.16e} {:.16e}", b[(i, j)].re, b[(i, j)].im);
                }
                writeln!(w, "{line}")?;
            }
        }
    }
    Ok(())
}

pub fn read_state_text(basis: &FockBasis, r: impl BufRead) -> Result<MixedState> {
    let mut state = MixedState::zero(basis);
    let mut lines = r.lines();
    let bad = |msg: String| Error::InvalidInput(format!("state file: {msg}"));
    while let Some(line) = lines.next() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let head: Vec<&str> = line.split_whitespace().collect();
        if head.len() != 5 || head[0] != "block" {
            return Err(bad(format!("expected block header, got `{line}`")));
        }
        let nums: Vec<usize> =
            head[1..].iter().map(|s| s.parse().map_err(|_| bad(format!("bad integer `{s}`")))).collect::<Result<_>>()?;
        let (m, n, rows, cols) = (nums[0], nums[1], nums[2], nums[3]);
        if m > basis.max_particles() || n > basis.max_particles() || (rows, cols) != state.blocks[m][n].shape() {
            return Err(bad(format!("block ({m},{n}) of shape {rows}x{cols} does not fit the basis")));
        }
        for i in 0..rows {
            let row = lines.next().ok_or_else(|| bad("truncated block".into()))??;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(format!("bad number `{s}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != 2 * cols {
                return Err(bad(format!("row {i} of block ({m},{n}) has {} numbers", vals.len())));
            }
            for j in 0..cols {
                state.blocks[m][n][(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }
    }
    state.validate()?;
    Ok(state)
}

/// CSV export of a density-matrix table: `p,q,row,col,re,im` for nonzero entries.
pub fn write_density_matrix_csv(table: &[Vec<CMat>], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p", "q", "row", "col", "re", "im"])?;
    for (p, row) in table.iter().enumerate() {
        for (q, m) in row.iter().enumerate() {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    let z = m[(i, j)];
                    if z.norm() == 0.0 {
                        continue;
                    }
                    out.write_record([
                        p.to_string(),
                        q.to_string(),
                        i.to_string(),
                        j.to_string(),
                        format!("{:.16e}", z.re),
                        format!("{:.16e}", z.im),
                    ])?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Random state of the given Fock-space rank (Ginibre construction).
pub fn random_state<R: rand::Rng>(rng: &mut R, basis: &FockBasis, rank: usize) -> MixedState {
    let rho = crate::random::density(rng, basis.dim(), rank);
    MixedState::from_matrix(basis, &rho).expect("Ginibre density is a state")
}

/// Random pure `n`-body state.
pub fn random_nbody<R: rand::Rng>(rng: &mut R, basis: &FockBasis, n: usize) -> CVec {
    crate::random::unit_vector(rng, basis.sector_dim(n))
}

/// Random number-conserving state with random sector weights.
pub fn random_number_conserving<R: rand::Rng>(rng: &mut R, basis: &FockBasis) -> MixedState {
    let mut weights: Vec<f64> = (0..=basis.max_particles()).map(|_| crate::random::uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut state = MixedState::zero(basis);
    for (m, w) in weights.iter().enumerate() {
        let d = basis.sector_dim(m);
        state.blocks[m][m] = crate::random::density(rng, d, d) * c(*w);
    }
    state
}
