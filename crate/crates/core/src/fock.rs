//! Truncated Fock space over `r` modes: occupation-number basis, ladder
//! operators and second quantization.
//!
//! Basis vectors of sector `n` are labelled by sorted mode tuples (strictly
//! increasing for fermions, nondecreasing for bosons) in lexicographic order.
//! Every basis vector is normalized: `|t⟩ = a†_{t_1}⋯a†_{t_n}Ω / √(∏ n_i!)`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{c, CMat, CVec, SparseMatrix, C64};
use crate::onebody::{OneBodyOperator, TwoBodyKernel};

/// Largest Fock dimension a basis may enumerate.
pub const MAX_FOCK_DIM: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Fermion,
    Boson,
}

impl Statistics {
    /// Sector dimension for `n` particles in `r` modes.
    pub fn sector_dim(self, r: usize, n: usize) -> usize {
        match self {
            Statistics::Fermion => crate::linalg::binomial_usize(r, n),
            Statistics::Boson => {
                if n == 0 {
                    1
                } else {
                    crate::linalg::binomial_usize(r + n - 1, n)
                }
            }
        }
    }
}

/// `a†_i |t⟩ = coef |t'⟩` on normalized basis tuples.
pub(crate) fn insert_mode(stats: Statistics, t: &[usize], i: usize) -> Option<(Vec<usize>, f64)> {
    match stats {
        Statistics::Fermion => {
            let pos = t.partition_point(|&x| x < i);
            if t.get(pos) == Some(&i) {
                return None;
            }
            let mut out = Vec::with_capacity(t.len() + 1);
            out.extend_from_slice(&t[..pos]);
            out.push(i);
            out.extend_from_slice(&t[pos..]);
            Some((out, if pos % 2 == 0 { 1.0 } else { -1.0 }))
        }
        Statistics::Boson => {
            let lo = t.partition_point(|&x| x < i);
            let hi = t.partition_point(|&x| x <= i);
            let mut out = Vec::with_capacity(t.len() + 1);
            out.extend_from_slice(&t[..hi]);
            out.push(i);
            out.extend_from_slice(&t[hi..]);
            Some((out, ((hi - lo + 1) as f64).sqrt()))
        }
    }
}

/// `a_i |t⟩ = coef |t'⟩` on normalized basis tuples.
pub(crate) fn remove_mode(stats: Statistics, t: &[usize], i: usize) -> Option<(Vec<usize>, f64)> {
    let lo = t.partition_point(|&x| x < i);
    let hi = t.partition_point(|&x| x <= i);
    if hi == lo {
        return None;
    }
    let mut out = t.to_vec();
    out.remove(lo);
    let coef = match stats {
        Statistics::Fermion => {
            if lo % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
        Statistics::Boson => ((hi - lo) as f64).sqrt(),
    };
    Some((out, coef))
}

fn enumerate_sector(stats: Statistics, r: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    fn rec(stats: Statistics, r: usize, n: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..r {
            cur.push(i);
            let next = if stats == Statistics::Fermion { i + 1 } else { i };
            rec(stats, r, n, next, cur, out);
            cur.pop();
        }
    }
    rec(stats, r, n, 0, &mut cur, &mut out);
    out
}

/// Occupation-number basis of `F^{≤N}`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    r: usize,
    n_max: usize,
    statistics: Statistics,
    sectors: Vec<Vec<Vec<usize>>>,
    offsets: Vec<usize>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
}

impl FockBasis {
    pub fn new(r: usize, n_max: usize, statistics: Statistics) -> Result<Self> {
        if r == 0 {
            return invalid("need at least one mode");
        }
        if statistics == Statistics::Fermion && n_max > r {
            return Err(Error::ParticleOverflow { requested: n_max, max: r });
        }
        let total: usize = (0..=n_max).map(|n| statistics.sector_dim(r, n)).sum();
        if total > MAX_FOCK_DIM {
            return Err(Error::CapExceeded { what: "Fock dimension", value: total, cap: MAX_FOCK_DIM });
        }
        let sectors: Vec<_> = (0..=n_max).map(|n| enumerate_sector(statistics, r, n)).collect();
        let mut offsets = vec![0];
        for s in &sectors {
            offsets.push(offsets.last().unwrap() + s.len());
        }
        let lookup = sectors
            .iter()
            .map(|s| s.iter().enumerate().map(|(k, t)| (t.clone(), k)).collect())
            .collect();
        Ok(Self { r, n_max, statistics, sectors, offsets, lookup })
    }

    pub fn modes(&self) -> usize {
        self.r
    }

    pub fn max_particles(&self) -> usize {
        self.n_max
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn sector_dim(&self, n: usize) -> usize {
        self.sectors[n].len()
    }

    pub fn sector_dims(&self) -> Vec<usize> {
        self.sectors.iter().map(Vec::len).collect()
    }

    pub fn offset(&self, n: usize) -> usize {
        self.offsets[n]
    }

    pub fn sector_range(&self, n: usize) -> Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    /// Mode tuples of sector `n`, in basis order.
    pub fn sector(&self, n: usize) -> &[Vec<usize>] {
        &self.sectors[n]
    }

    /// Position of a mode tuple inside its sector.
    pub fn index_of(&self, t: &[usize]) -> Option<usize> {
        self.lookup.get(t.len())?.get(t).copied()
    }

    pub fn global_index(&self, t: &[usize]) -> Option<usize> {
        self.index_of(t).map(|k| self.offsets[t.len()] + k)
    }

    /// Sector and tuple of a global index.
    pub fn label(&self, global: usize) -> (usize, &[usize]) {
        let n = self.offsets.partition_point(|&o| o <= global) - 1;
        (n, &self.sectors[n][global - self.offsets[n]])
    }

    /// Occupation numbers `n_i` of a tuple.
    pub fn occupations(&self, t: &[usize]) -> Vec<usize> {
        let mut occ = vec![0; self.r];
        for &i in t {
            occ[i] += 1;
        }
        occ
    }

    /// `√(∏ n_i!)`: norm of `a†_{t_1}⋯a†_{t_n}Ω`.
    pub fn product_norm(&self, t: &[usize]) -> f64 {
        match self.statistics {
            Statistics::Fermion => 1.0,
            Statistics::Boson => self
                .occupations(t)
                .iter()
                .map(|&k| (1..=k).map(|j| j as f64).product::<f64>())
                .product::<f64>()
                .sqrt(),
        }
    }

    pub(crate) fn check_sector(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            return Err(Error::ParticleOverflow { requested: n, max: self.n_max });
        }
        Ok(())
    }

    pub(crate) fn check_modes(&self, found: usize) -> Result<()> {
        if found != self.r {
            return Err(Error::DimensionMismatch { expected: self.r, found });
        }
        Ok(())
    }

    /// Same modes and statistics with a different truncation.
    pub fn with_max_particles(&self, n_max: usize) -> Result<Self> {
        Self::new(self.r, n_max, self.statistics)
    }
}

/// Places a sector-`n` vector into the full Fock space.
pub fn embed_sector(basis: &FockBasis, n: usize, v: &CVec) -> Result<CVec> {
    basis.check_sector(n)?;
    if v.len() != basis.sector_dim(n) {
        return Err(Error::DimensionMismatch { expected: basis.sector_dim(n), found: v.len() });
    }
    let mut out = CVec::zeros(basis.dim());
    out.rows_mut(basis.offset(n), v.len()).copy_from(v);
    Ok(out)
}

/// Sector-`n` component of a Fock vector.
pub fn sector_part(basis: &FockBasis, n: usize, v: &CVec) -> CVec {
    v.rows(basis.offset(n), basis.sector_dim(n)).into_owned()
}

pub fn vacuum(basis: &FockBasis) -> CVec {
    let mut v = CVec::zeros(basis.dim());
    v[0] = c(1.0);
    v
}

/// `a†(f)` applied to a sector-`n` vector; the result lives in sector `n+1`.
pub fn create_in_sector(basis: &FockBasis, n: usize, f: &CVec, v: &CVec) -> CVec {
    let mut out = CVec::zeros(basis.sector_dim(n + 1));
    for (k, t) in basis.sector(n).iter().enumerate() {
        let a = v[k];
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, &fi) in f.iter().enumerate() {
            if fi == C64::new(0.0, 0.0) {
                continue;
            }
            if let Some((t2, s)) = insert_mode(basis.statistics, t, i) {
                out[basis.index_of(&t2).unwrap()] += a * fi * s;
            }
        }
    }
    out
}

/// `a(f)` applied to a sector-`n` vector (`n ≥ 1`).
pub fn annihilate_in_sector(basis: &FockBasis, n: usize, f: &CVec, v: &CVec) -> CVec {
    let mut out = CVec::zeros(basis.sector_dim(n - 1));
    for (k, t) in basis.sector(n).iter().enumerate() {
        let a = v[k];
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        let mut prev = usize::MAX;
        for &i in t {
            if i == prev {
                continue;
            }
            prev = i;
            if let Some((t2, s)) = remove_mode(basis.statistics, t, i) {
                out[basis.index_of(&t2).unwrap()] += a * f[i].conj() * s;
            }
        }
    }
    out
}

/// `f_1 ∧ ⋯ ∧ f_n` (fermions) or `f_1 ∨ ⋯ ∨ f_n` (bosons), i.e.
/// `a†(f_1)⋯a†(f_n)Ω` as a sector-`n` vector.
pub fn product_state(basis: &FockBasis, orbitals: &[CVec]) -> Result<CVec> {
    basis.check_sector(orbitals.len())?;
    let mut v = CVec::from_element(1, c(1.0));
    for (k, f) in orbitals.iter().rev().enumerate() {
        basis.check_modes(f.len())?;
        v = create_in_sector(basis, k, f, &v);
    }
    Ok(v)
}

/// Wedge (fermions) or vee (bosons) product of an `n1`-body and an
/// `n2`-body vector, consistent with `product_state`:
/// `(f_1∧⋯∧f_a) ∧ (g_1∧⋯∧g_b) = f_1∧⋯∧f_a∧g_1∧⋯∧g_b`.
pub fn wedge(basis: &FockBasis, n1: usize, psi1: &CVec, n2: usize, psi2: &CVec) -> Result<CVec> {
    if n1 + n2 > basis.max_particles() {
        return Err(Error::ParticleOverflow { requested: n1 + n2, max: basis.max_particles() });
    }
    for (n, v) in [(n1, psi1), (n2, psi2)] {
        if v.len() != basis.sector_dim(n) {
            return Err(Error::DimensionMismatch { expected: basis.sector_dim(n), found: v.len() });
        }
    }
    let mut out = CVec::zeros(basis.sector_dim(n1 + n2));
    for (k, t) in basis.sector(n1).iter().enumerate() {
        let a = psi1[k];
        if a == C64::new(0.0, 0.0) {
            continue;
        }
        // |t⟩ = a†_{t_1}⋯a†_{t_n1}Ω / K_t; apply that creation string to ψ2.
        let mut v = psi2.clone();
        for (step, &i) in t.iter().rev().enumerate() {
            v = create_in_sector(basis, n2 + step, &unit(basis.modes(), i), &v);
        }
        out += v * (a / c(basis.product_norm(t)));
    }
    Ok(out)
}

pub(crate) fn unit(r: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(r);
    v[i] = c(1.0);
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectorStructure {
    NumberConserving,
    Raising,
    Lowering,
    General,
}

/// Operator on `F^{≤N}` stored as a sparse matrix in the global basis order.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    matrix: SparseMatrix,
    structure: SectorStructure,
}

impl FockOperator {
    pub fn new(matrix: SparseMatrix, structure: SectorStructure) -> Self {
        Self { matrix, structure }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn structure(&self) -> SectorStructure {
        self.structure
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        self.matrix.matvec(v)
    }

    /// Dense block mapping sector `n` to sector `m`.
    pub fn sector_block(&self, basis: &FockBasis, m: usize, n: usize) -> CMat {
        self.matrix.block(basis.sector_range(m), basis.sector_range(n))
    }

    /// Sparse sector-`n` diagonal block.
    pub fn sector_sparse(&self, basis: &FockBasis, n: usize) -> SparseMatrix {
        let range = basis.sector_range(n);
        let start = range.start;
        let triplets = range.clone().flat_map(|i| {
            self.matrix
                .row(i)
                .iter()
                .filter(|(j, _)| range.contains(j))
                .map(move |&(j, v)| (i - start, j - start, v))
                .collect::<Vec<_>>()
        });
        SparseMatrix::from_triplets(range.len(), range.len(), triplets)
    }

    pub fn adjoint(&self) -> Self {
        let structure = match self.structure {
            SectorStructure::Raising => SectorStructure::Lowering,
            SectorStructure::Lowering => SectorStructure::Raising,
            s => s,
        };
        Self { matrix: self.matrix.adjoint(), structure }
    }

    pub fn compose(&self, other: &Self) -> Self {
        let structure = match (self.structure, other.structure) {
            (SectorStructure::NumberConserving, s) | (s, SectorStructure::NumberConserving) => s,
            (SectorStructure::Raising, SectorStructure::Lowering)
            | (SectorStructure::Lowering, SectorStructure::Raising) => SectorStructure::NumberConserving,
            _ => SectorStructure::General,
        };
        Self { matrix: self.matrix.mul(&other.matrix), structure }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let structure = if self.structure == other.structure { self.structure } else { SectorStructure::General };
        Self { matrix: self.matrix.add(&other.matrix), structure }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { matrix: self.matrix.scale(s), structure: self.structure }
    }

    /// Coordinate-list export, one nonzero per line:
    /// `row_sector row_index col_sector col_index re im`.
    pub fn to_coo_text(&self, basis: &FockBasis) -> String {
        let mut s = String::from("# row_sector row_index col_sector col_index re im\n");
        for (i, j, v) in self.matrix.triplets() {
            let (m, _) = basis.label(i);
            let (n, _) = basis.label(j);
            let _ = writeln!(s, "{m} {} {n} {} {:.16e} {:.16e}", i - basis.offset(m), j - basis.offset(n), v.re, v.im);
        }
        s
    }
}

/// `a†(f)`, mapping sector `n` to `n+1` and killing sector `N`.
pub fn creation(basis: &FockBasis, f: &CVec) -> Result<FockOperator> {
    basis.check_modes(f.len())?;
    let mut triplets = Vec::new();
    for n in 0..basis.max_particles() {
        for (k, t) in basis.sector(n).iter().enumerate() {
            for (i, &fi) in f.iter().enumerate() {
                if fi == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((t2, s)) = insert_mode(basis.statistics(), t, i) {
                    triplets.push((basis.global_index(&t2).unwrap(), basis.offset(n) + k, fi * s));
                }
            }
        }
    }
    Ok(FockOperator::new(SparseMatrix::from_triplets(basis.dim(), basis.dim(), triplets), SectorStructure::Raising))
}

/// `a(f)`, the adjoint of `a†(f)`.
pub fn annihilation(basis: &FockBasis, f: &CVec) -> Result<FockOperator> {
    Ok(creation(basis, f)?.adjoint())
}

/// CAR (fermions) or CCR (bosons) residual for the pair `(f, g)`, summed over
/// the three relations (Frobenius norms). The check is restricted to
/// `F^{≤N-1}`, where truncation does not interfere.
pub fn car_ccr_residual(basis: &FockBasis, f: &CVec, g: &CVec) -> Result<f64> {
    let af = creation(basis, f)?.to_dense();
    let ag = creation(basis, g)?.to_dense();
    let (af_star, ag_star) = (af.adjoint(), ag.adjoint());
    let sign = match basis.statistics() {
        Statistics::Fermion => c(1.0),
        Statistics::Boson => c(-1.0),
    };
    let dim = basis.dim();
    let overlap = g.dotc(f);
    let mixed = &ag_star * &af + &af * &ag_star * sign - CMat::identity(dim, dim) * overlap;
    let raising = &af * &ag + &ag * &af * sign;
    let lowering = &af_star * &ag_star + &ag_star * &af_star * sign;
    // a†(f) kills the top sector, so both relations fail there unless the
    // truncation is trivial (fermions with N = r).
    let keep = if basis.statistics() == Statistics::Fermion && basis.max_particles() == basis.modes() {
        dim
    } else {
        basis.offset(basis.max_particles())
    };
    let restrict = |m: &CMat| m.view((0, 0), (keep, keep)).norm();
    Ok(restrict(&mixed) + restrict(&raising) + restrict(&lowering))
}

/// Number-conserving sector-`n` block of `Σ A_ij a†_i a_j`.
pub fn onebody_sector(basis: &FockBasis, a: &CMat, n: usize) -> SparseMatrix {
    let stats = basis.statistics();
    let mut triplets = Vec::new();
    for (k, t) in basis.sector(n).iter().enumerate() {
        let mut prev = usize::MAX;
        for &j in t {
            if j == prev {
                continue;
            }
            prev = j;
            let (t1, s1) = remove_mode(stats, t, j).unwrap();
            for i in 0..basis.modes() {
                let aij = a[(i, j)];
                if aij == C64::new(0.0, 0.0) {
                    continue;
                }
                if let Some((t2, s2)) = insert_mode(stats, &t1, i) {
                    triplets.push((basis.index_of(&t2).unwrap(), k, aij * (s1 * s2)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(basis.sector_dim(n), basis.sector_dim(n), triplets)
}

/// Sector-`n` block of `Σ_{i≤j,k≤l} W_{ij,kl} a†_i a†_j a_l a_k`.
pub fn twobody_sector(basis: &FockBasis, w: &TwoBodyKernel, n: usize) -> SparseMatrix {
    let stats = basis.statistics();
    let mut by_kl: HashMap<(usize, usize), Vec<((usize, usize), C64)>> = HashMap::new();
    for (ij, kl, v) in w.ordered_elements() {
        by_kl.entry(kl).or_default().push((ij, v));
    }
    let mut triplets = Vec::new();
    if n >= 2 {
        for (col, t) in basis.sector(n).iter().enumerate() {
            for (&(k, l), targets) in &by_kl {
                let Some((t1, s1)) = remove_mode(stats, t, k) else { continue };
                let Some((t2, s2)) = remove_mode(stats, &t1, l) else { continue };
                for &((i, j), v) in targets {
                    let Some((t3, s3)) = insert_mode(stats, &t2, j) else { continue };
                    let Some((t4, s4)) = insert_mode(stats, &t3, i) else { continue };
                    triplets.push((basis.index_of(&t4).unwrap(), col, v * (s1 * s2 * s3 * s4)));
                }
            }
        }
    }
    SparseMatrix::from_triplets(basis.sector_dim(n), basis.sector_dim(n), triplets)
}

fn block_diagonal(basis: &FockBasis, blocks: impl Fn(usize) -> SparseMatrix) -> FockOperator {
    let mut triplets = Vec::new();
    for n in 0..=basis.max_particles() {
        let off = basis.offset(n);
        triplets.extend(blocks(n).triplets().map(|(i, j, v)| (i + off, j + off, v)));
    }
    FockOperator::new(SparseMatrix::from_triplets(basis.dim(), basis.dim(), triplets), SectorStructure::NumberConserving)
}

pub fn second_quantize_onebody(basis: &FockBasis, a: &OneBodyOperator) -> Result<FockOperator> {
    basis.check_modes(a.dim())?;
    Ok(block_diagonal(basis, |n| onebody_sector(basis, a.matrix(), n)))
}

pub fn second_quantize_twobody(basis: &FockBasis, w: &TwoBodyKernel) -> Result<FockOperator> {
    check_kernel(basis, w)?;
    Ok(block_diagonal(basis, |n| twobody_sector(basis, w, n)))
}

pub fn number_operator(basis: &FockBasis) -> FockOperator {
    block_diagonal(basis, |n| {
        let d = basis.sector_dim(n);
        SparseMatrix::from_triplets(d, d, (0..d).map(|k| (k, k, c(n as f64))))
    })
}

fn check_kernel(basis: &FockBasis, w: &TwoBodyKernel) -> Result<()> {
    basis.check_modes(w.modes())?;
    if w.statistics() != basis.statistics() {
        return Err(Error::StatisticsMismatch(format!(
            "kernel is {:?} but basis is {:?}",
            w.statistics(),
            basis.statistics()
        )));
    }
    Ok(())
}

/// `ℍ = 𝔸(h) + 𝕎(W)` on the whole truncated Fock space.
pub fn assemble_hamiltonian(basis: &FockBasis, h: &OneBodyOperator, w: &TwoBodyKernel) -> Result<FockOperator> {
    basis.check_modes(h.dim())?;
    check_kernel(basis, w)?;
    Ok(block_diagonal(basis, |n| sector_hamiltonian_unchecked(basis, h, w, n)))
}

/// Sector-`n` block of `ℍ`, the N-body Hamiltonian `H(n)`.
pub fn sector_hamiltonian(basis: &FockBasis, h: &OneBodyOperator, w: &TwoBodyKernel, n: usize) -> Result<SparseMatrix> {
    basis.check_sector(n)?;
    basis.check_modes(h.dim())?;
    check_kernel(basis, w)?;
    Ok(sector_hamiltonian_unchecked(basis, h, w, n))
}

fn sector_hamiltonian_unchecked(basis: &FockBasis, h: &OneBodyOperator, w: &TwoBodyKernel, n: usize) -> SparseMatrix {
    let one = onebody_sector(basis, h.matrix(), n);
    if w.is_zero() || n < 2 {
        one
    } else {
        one.add(&twobody_sector(basis, w, n))
    }
}

/// Dense lift `Γ(B)` restricted to every sector: block `n` maps
/// `|t⟩ ↦ a†(B e_{t_1})⋯a†(B e_{t_n})Ω / √(∏ n_i!)`.
pub fn lift_onebody(basis: &FockBasis, b: &CMat) -> Result<Vec<CMat>> {
    basis.check_modes(b.nrows())?;
    if !b.is_square() {
        return invalid("lifted one-body map must be square");
    }
    let mut blocks = vec![CMat::from_element(1, 1, c(1.0))];
    for n in 1..=basis.max_particles() {
        let prev = &blocks[n - 1];
        let mut block = CMat::zeros(basis.sector_dim(n), basis.sector_dim(n));
        for (k, t) in basis.sector(n).iter().enumerate() {
            let tail = &t[1..];
            let tail_idx = basis.index_of(tail).unwrap();
            let tail_col = prev.column(tail_idx).into_owned();
            let head = b.column(t[0]).into_owned();
            let mut col = create_in_sector(basis, n - 1, &head, &tail_col);
            let occ = t.iter().filter(|&&x| x == t[0]).count();
            if basis.statistics() == Statistics::Boson {
                col /= c((occ as f64).sqrt());
            }
            block.set_column(k, &col);
        }
        blocks.push(block);
    }
    Ok(blocks)
}

/// Sector-`n` images of the basis of a smaller Fock space under the lift of
/// an isometry `phi` (r × k): column `t` is `a†(φ_{t_1})⋯a†(φ_{t_n})Ω / √(∏ n_i!)`
/// for the tuples `t` of `small`'s sector `n`.
pub fn lift_isometry(basis: &FockBasis, small: &FockBasis, phi: &CMat, n: usize) -> Result<CMat> {
    basis.check_modes(phi.nrows())?;
    small.check_modes(phi.ncols())?;
    basis.check_sector(n)?;
    small.check_sector(n)?;
    if small.statistics() != basis.statistics() {
        return Err(Error::StatisticsMismatch("orbital basis statistics differ".into()));
    }
    let mut out = CMat::zeros(basis.sector_dim(n), small.sector_dim(n));
    for (col, t) in small.sector(n).iter().enumerate() {
        let orbitals: Vec<CVec> = t.iter().map(|&i| phi.column(i).into_owned()).collect();
        let v = product_state(basis, &orbitals)? / c(small.product_norm(t));
        out.set_column(col, &v);
    }
    Ok(out)
}

/// Poisson tail `e^{-x} Σ_{n>N} x^n/n!` of a coherent state with `x = ‖f‖²`.
pub fn coherent_tail(norm_sq: f64, n_max: usize) -> f64 {
    let mut term = (-norm_sq).exp();
    for n in 1..=n_max {
        term *= norm_sq / n as f64;
    }
    let mut tail = 0.0;
    let mut n = n_max + 1;
    loop {
        term *= norm_sq / n as f64;
        tail += term;
        if term < 1e-300 || term < tail * 1e-17 || n > n_max + 10_000 {
            break;
        }
        n += 1;
    }
    tail
}

/// Default acceptable truncated weight for coherent states.
pub const COHERENT_TAIL_TOLERANCE: f64 = 1e-8;

/// Weyl coherent state `exp(a†(f) − a(f))Ω` on `F^{≤N}` (bosons), renormalized.
/// Returns the vector and the Poisson tail weight discarded by the truncation.
pub fn weyl_coherent_state(basis: &FockBasis, f: &CVec, tolerance: f64) -> Result<(CVec, f64)> {
    if basis.statistics() != Statistics::Boson {
        return Err(Error::StatisticsMismatch("coherent states need a bosonic basis".into()));
    }
    basis.check_modes(f.len())?;
    let tail = coherent_tail(f.norm_squared(), basis.max_particles());
    if tail > tolerance {
        return Err(Error::Truncation { tail, tolerance });
    }
    let a_dag = creation(basis, f)?.to_dense();
    // exp(A) with A anti-Hermitian: A = -iH, H = i(a† − a) Hermitian.
    let h = (&a_dag - a_dag.adjoint()) * C64::new(0.0, 1.0);
    let (vals, vecs) = crate::linalg::eigh(&h);
    let phases = CVec::from_iterator(vals.len(), vals.iter().map(|&e| C64::new(0.0, -e).exp()));
    let u = &vecs * CMat::from_diagonal(&phases) * vecs.adjoint();
    let mut v = u.column(0).into_owned();
    let norm = v.norm();
    v /= c(norm);
    Ok((v, tail))
}

/// Exact coherent-state amplitudes `e^{-‖f‖²/2} Σ_n a†(f)^n Ω / n!`, cut at `N` and renormalized.
pub fn coherent_series(basis: &FockBasis, f: &CVec) -> Result<CVec> {
    basis.check_modes(f.len())?;
    let mut out = CVec::zeros(basis.dim());
    let mut v = CVec::from_element(1, c(1.0));
    let mut fact = 1.0;
    for n in 0..=basis.max_particles() {
        if n > 0 {
            v = create_in_sector(basis, n - 1, f, &v);
            fact *= n as f64;
        }
        out.rows_mut(basis.offset(n), v.len()).copy_from(&(&v / c(fact)));
    }
    let norm = out.norm();
    Ok(out / c(norm))
}

/// Isometric embedding of sector `n` into `h^{⊗n}` (columns are the
/// normalized antisymmetric / symmetric tensors of the basis tuples).
pub fn tensor_embedding(basis: &FockBasis, n: usize) -> Result<CMat> {
    basis.check_sector(n)?;
    let r = basis.modes();
    let tdim = r.checked_pow(n as u32).filter(|&d| d <= 1 << 20).ok_or(Error::CapExceeded {
        what: "tensor dimension",
        value: usize::MAX,
        cap: 1 << 20,
    })?;
    let mut e = CMat::zeros(tdim, basis.sector_dim(n));
    let perms = permutations(n);
    let nfact: f64 = (1..=n).map(|k| k as f64).product();
    for (col, t) in basis.sector(n).iter().enumerate() {
        let scale = match basis.statistics() {
            Statistics::Fermion => 1.0 / nfact.sqrt(),
            Statistics::Boson => 1.0 / (nfact * basis.product_norm(t).powi(2)).sqrt(),
        };
        for (perm, sign) in &perms {
            let row = perm.iter().fold(0, |acc, &p| acc * r + t[p]);
            let s = match basis.statistics() {
                Statistics::Fermion => *sign,
                Statistics::Boson => 1.0,
            };
            e[(row, col)] += c(s * scale);
        }
    }
    Ok(e)
}

/// All permutations of `0..n` with their signs.
pub(crate) fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn rec(k: usize, p: &mut Vec<usize>, sign: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if k == p.len() {
            out.push((p.clone(), sign));
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            rec(k + 1, p, if i == k { sign } else { -sign }, out);
            p.swap(k, i);
        }
    }
    rec(0, &mut p, 1.0, &mut out);
    out
}

/// `n`-body operator `Σ_{a<b} W_{ab}` acting on `h^{⊗n}` from the tensor kernel.
pub fn tensor_pair_sum(w: &TwoBodyKernel, n: usize) -> CMat {
    let r = w.modes();
    let dim = r.pow(n as u32);
    let mut out = CMat::zeros(dim, dim);
    let digits = |mut x: usize| {
        let mut d = vec![0; n];
        for k in (0..n).rev() {
            d[k] = x % r;
            x /= r;
        }
        d
    };
    for col in 0..dim {
        let dc = digits(col);
        for a in 0..n {
            for b in a + 1..n {
                for &(i, j, k, l, v) in w.entries() {
                    if dc[a] != k || dc[b] != l {
                        continue;
                    }
                    let mut dr = dc.clone();
                    dr[a] = i;
                    dr[b] = j;
                    let row = dr.iter().fold(0, |acc, &x| acc * r + x);
                    out[(row, col)] += v;
                }
            }
        }
    }
    out
}

/// `n`-body operator `Σ_a A_a` on `h^{⊗n}`.
pub fn tensor_onebody_sum(a: &CMat, n: usize) -> CMat {
    let r = a.nrows();
    let mut out = CMat::zeros(r.pow(n as u32), r.pow(n as u32));
    for k in 0..n {
        let left = CMat::identity(r.pow(k as u32), r.pow(k as u32));
        let right = CMat::identity(r.pow((n - k - 1) as u32), r.pow((n - k - 1) as u32));
        out += left.kronecker(a).kronecker(&right);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onebody::{kinetic_operator, OneBodySpace};
    use crate::random;

    fn e(r: usize, i: usize) -> CVec {
        unit(r, i)
    }

    #[test]
    fn sector_sizes() {
        let b = FockBasis::new(2, 2, Statistics::Fermion).unwrap();
        assert_eq!(b.sector_dims(), vec![1, 2, 1]);
        assert_eq!(b.dim(), 4);
        let b = FockBasis::new(2, 2, Statistics::Boson).unwrap();
        assert_eq!(b.sector_dims(), vec![1, 2, 3]);
        assert_eq!(b.dim(), 6);
        assert_eq!(FockBasis::new(4, 2, Statistics::Fermion).unwrap().dim(), 11);
        assert!(FockBasis::new(2, 3, Statistics::Fermion).is_err());
        let b = FockBasis::new(5, 3, Statistics::Boson).unwrap();
        for n in 0..=3 {
            assert_eq!(b.sector_dim(n), Statistics::Boson.sector_dim(5, n));
        }
        assert_eq!(b.sector(2)[0], vec![0, 0]);
        assert_eq!(b.sector(2)[1], vec![0, 1]);
        assert_eq!(b.label(0), (0, &[][..]));
    }

    #[test]
    fn creation_examples() {
        let b = FockBasis::new(2, 2, Statistics::Fermion).unwrap();
        let a1 = creation(&b, &e(2, 0)).unwrap();
        let a2 = creation(&b, &e(2, 1)).unwrap();
        let omega = vacuum(&b);
        let one = a1.apply(&omega);
        assert_eq!(one, embed_sector(&b, 1, &e(2, 0)).unwrap());
        assert_eq!(a1.apply(&one).norm(), 0.0);
        let e12 = embed_sector(&b, 2, &CVec::from_element(1, c(1.0))).unwrap();
        assert_eq!(a1.apply(&a2.apply(&omega)), e12);
        assert_eq!(a2.apply(&a1.apply(&omega)), -e12.clone());
        let d1 = annihilation(&b, &e(2, 0)).unwrap();
        assert_eq!(d1.apply(&omega).norm(), 0.0);
        assert_eq!(d1.apply(&e12), embed_sector(&b, 1, &e(2, 1)).unwrap());
    }

    #[test]
    fn boson_annihilation_on_double_occupancy() {
        let b = FockBasis::new(2, 2, Statistics::Boson).unwrap();
        let two = b.global_index(&[0, 0]).unwrap();
        let mut v = CVec::zeros(b.dim());
        v[two] = c(1.0);
        let out = annihilation(&b, &e(2, 0)).unwrap().apply(&v);
        let mut expect = CVec::zeros(b.dim());
        expect[b.global_index(&[0]).unwrap()] = c(2f64.sqrt());
        assert!((out - expect).norm() < 1e-15);
    }

    #[test]
    fn car_ccr() {
        let mut rng = random::rng(1);
        let bf = FockBasis::new(6, 3, Statistics::Fermion).unwrap();
        for _ in 0..5 {
            let f = random::gaussian_vector(&mut rng, 6);
            let g = random::gaussian_vector(&mut rng, 6);
            let res = car_ccr_residual(&bf, &f, &g).unwrap();
            assert!(res <= 1e-12, "{res}");
        }
        let bb = FockBasis::new(3, 6, Statistics::Boson).unwrap();
        for _ in 0..5 {
            let f = random::gaussian_vector(&mut rng, 3);
            let g = random::gaussian_vector(&mut rng, 3);
            assert!(car_ccr_residual(&bb, &f, &g).unwrap() <= 1e-12);
        }
        // the top sector genuinely breaks the CCR
        let f = e(3, 0);
        let a = creation(&bb, &f).unwrap().to_dense();
        let comm = a.adjoint() * &a - &a * a.adjoint();
        let top = bb.sector_range(6);
        assert!((comm[(top.start, top.start)] - c(1.0)).norm() > 0.5);
        let bfull = FockBasis::new(3, 3, Statistics::Fermion).unwrap();
        let e1 = e(3, 0);
        let a = creation(&bfull, &e1).unwrap().to_dense();
        let anti = a.adjoint() * &a + &a * a.adjoint();
        assert!((anti - CMat::identity(bfull.dim(), bfull.dim())).norm() < 1e-15);
    }

    #[test]
    fn fermionic_norm_identity() {
        let mut rng = random::rng(2);
        let b = FockBasis::new(4, 3, Statistics::Fermion).unwrap();
        for _ in 0..10 {
            let f = random::gaussian_vector(&mut rng, 4);
            let a = creation(&b, &f).unwrap().to_dense();
            assert!((crate::linalg::operator_norm(&a) - f.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn onebody_quantization() {
        let b = FockBasis::new(3, 2, Statistics::Fermion).unwrap();
        let n_op = second_quantize_onebody(&b, &OneBodyOperator::identity(3)).unwrap();
        assert_eq!(n_op, number_operator(&b));
        let zero = second_quantize_onebody(&b, &OneBodyOperator::zero(3)).unwrap();
        assert_eq!(zero.matrix().nnz(), 0);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(0.3), c(-1.1), c(2.0)]));
        let a = second_quantize_onebody(&b, &OneBodyOperator::new(d, "diag").unwrap()).unwrap();
        let k = b.global_index(&[0, 1]).unwrap();
        assert!((a.matrix().get(k, k) - c(-0.8)).norm() < 1e-15);
    }

    #[test]
    fn quantization_matches_tensor_oracle() {
        let mut rng = random::rng(7);
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let r = 4;
            let b = FockBasis::new(r, 3, stats).unwrap();
            let h = OneBodyOperator::new(random::hermitian(&mut rng, r), "h").unwrap();
            let g = random::hermitian(&mut rng, r * r);
            let swap = CMat::from_fn(r * r, r * r, |x, y| if y == (x % r) * r + x / r { c(1.0) } else { c(0.0) });
            let sym = (&g + &swap * &g * &swap).scale(0.5);
            let entries: Vec<_> = (0..r * r)
                .flat_map(|x| (0..r * r).map(move |y| (x, y)))
                .map(|(x, y)| (x / r, x % r, y / r, y % r, sym[(x, y)]))
                .collect();
            let w = TwoBodyKernel::from_entries(r, stats, entries).unwrap();
            for n in 0..=3 {
                let emb = tensor_embedding(&b, n).unwrap();
                assert!((emb.adjoint() * &emb - CMat::identity(b.sector_dim(n), b.sector_dim(n))).norm() < 1e-12);
                let direct_h = emb.adjoint() * tensor_onebody_sum(h.matrix(), n) * &emb;
                assert!((onebody_sector(&b, h.matrix(), n).to_dense() - direct_h).norm() < 1e-12);
                let direct_w = emb.adjoint() * tensor_pair_sum(&w, n) * &emb;
                assert!((twobody_sector(&b, &w, n).to_dense() - direct_w).norm() < 1e-12, "{stats:?} n={n}");
            }
        }
    }

    #[test]
    fn hamiltonian_conventions() {
        let space = OneBodySpace::lattice(1, 4, 4.0).unwrap();
        let t = kinetic_operator(&space).unwrap();
        let w = TwoBodyKernel::soft_coulomb(&space, Statistics::Fermion, 1.0, 1.0).unwrap();
        let b = FockBasis::new(4, 3, Statistics::Fermion).unwrap();
        let h = assemble_hamiltonian(&b, &t, &w).unwrap();
        assert_eq!(h.sector_block(&b, 0, 0), CMat::zeros(1, 1));
        assert!((h.sector_block(&b, 1, 1) - t.matrix()).norm() < 1e-15);
        assert!(crate::linalg::hermiticity_deviation(&h.to_dense()) < 1e-12);
        let wb = w.with_statistics(Statistics::Boson);
        assert!(matches!(assemble_hamiltonian(&b, &t, &wb), Err(Error::StatisticsMismatch(_))));
        let free = assemble_hamiltonian(&b, &t, &TwoBodyKernel::zero(4, Statistics::Fermion)).unwrap();
        assert_eq!(free, second_quantize_onebody(&b, &t).unwrap());
    }

    #[test]
    fn wedge_products() {
        let b = FockBasis::new(3, 2, Statistics::Fermion).unwrap();
        let w = wedge(&b, 1, &e(3, 0), 1, &e(3, 1)).unwrap();
        assert!((w.norm() - 1.0).abs() < 1e-15);
        let mut rng = random::rng(4);
        let f = random::gaussian_vector(&mut rng, 3);
        assert!(wedge(&b, 1, &f, 1, &f).unwrap().norm() < 1e-14);
        assert!(wedge(&b, 2, &CVec::from_element(3, c(1.0)), 1, &f).is_err());
        let bb = FockBasis::new(3, 2, Statistics::Boson).unwrap();
        let ff = wedge(&bb, 1, &f, 1, &f).unwrap();
        // f ⊗ f in the symmetric basis
        let emb = tensor_embedding(&bb, 2).unwrap();
        let ftf = f.kronecker(&f);
        assert!((&emb * &ff - ftf * c(2f64.sqrt())).norm() < 1e-12);
        let g = random::gaussian_vector(&mut rng, 3);
        let prod = product_state(&b, &[f.clone(), g.clone()]).unwrap();
        assert!((prod - wedge(&b, 1, &f, 1, &g).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn lifted_unitary_covariance() {
        let mut rng = random::rng(9);
        for stats in [Statistics::Fermion, Statistics::Boson] {
            let b = FockBasis::new(4, 3, stats).unwrap();
            let u = random::unitary(&mut rng, 4);
            let a = OneBodyOperator::new(random::hermitian(&mut rng, 4), "a").unwrap();
            let lifts = lift_onebody(&b, &u).unwrap();
            let qa = second_quantize_onebody(&b, &a).unwrap();
            let qua = second_quantize_onebody(&b, &a.conjugated(&u).unwrap()).unwrap();
            for n in 0..=3 {
                let l = &lifts[n];
                assert!((l.adjoint() * l - CMat::identity(l.nrows(), l.nrows())).norm() < 1e-10);
                let lhs = qua.sector_block(&b, n, n);
                let rhs = l * qa.sector_block(&b, n, n) * l.adjoint();
                assert!((lhs - rhs).norm() < 1e-10);
                let emb = tensor_embedding(&b, n).unwrap();
                let un = (0..n).fold(CMat::identity(1, 1), |acc, _| acc.kronecker(&u));
                assert!((&emb * l - un * &emb).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn coherent_states() {
        let b = FockBasis::new(2, 8, Statistics::Boson).unwrap();
        let (v, tail) = weyl_coherent_state(&b, &CVec::zeros(2), 1e-8).unwrap();
        assert_eq!(tail, 0.0);
        assert!((v - vacuum(&b)).norm() < 1e-14);
        let f = CVec::from_vec(vec![c(0.3), c(0.0)]);
        let (v, tail) = weyl_coherent_state(&b, &f, 1e-8).unwrap();
        assert!(tail <= 1e-8 && tail > 0.0);
        let exact = coherent_series(&b, &f).unwrap();
        assert!((v - exact).norm() < 1e-7);
        let big = CVec::from_vec(vec![c(2.0), c(0.0)]);
        assert!(matches!(weyl_coherent_state(&b, &big, 1e-8), Err(Error::Truncation { .. })));
        let bf = FockBasis::new(2, 2, Statistics::Fermion).unwrap();
        assert!(weyl_coherent_state(&bf, &f, 1e-8).is_err());
    }

    #[test]
    fn coo_export() {
        let b = FockBasis::new(2, 1, Statistics::Fermion).unwrap();
        let text = creation(&b, &e(2, 1)).unwrap().to_coo_text(&b);
        assert_eq!(text.lines().nth(1).unwrap(), "1 1 0 0 1.0000000000000000e0 0.0000000000000000e0");
    }
}
