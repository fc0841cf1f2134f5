//! Discretized one-particle space: lattice geometry, one- and two-body
//! operator matrices, localization windows and IMS partitions of unity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::Statistics;
use crate::linalg::{c, eigh, hermiticity_deviation, CMat, CVec, C64};

/// Default cap on the number of one-body modes.
pub const DEFAULT_MODE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Cubic lattice with `points` sites per axis in a box of side `box_len`,
/// centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub dim: usize,
    pub points: usize,
    pub box_len: f64,
    pub boundary: Boundary,
}

impl Lattice {
    pub fn spacing(&self) -> f64 {
        self.box_len / self.points as f64
    }

    /// Volume element h^d.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn site_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    /// Per-axis integer coordinates of a site (axis 0 varies slowest).
    pub fn multi_index(&self, site: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = site;
        for axis in (0..self.dim).rev() {
            idx[axis] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    pub fn site_of(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Cell-centered position of a site.
    pub fn position(&self, site: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(site)
            .into_iter()
            .map(|i| -0.5 * self.box_len + (i as f64 + 0.5) * h)
            .collect()
    }

    /// Displacement `x_b - x_a`, minimum-image on the torus.
    pub fn displacement(&self, a: usize, b: usize) -> Vec<f64> {
        let h = self.spacing();
        let ia = self.multi_index(a);
        let ib = self.multi_index(b);
        ia.iter()
            .zip(&ib)
            .map(|(&i, &j)| {
                let mut d = j as i64 - i as i64;
                if self.boundary == Boundary::Periodic {
                    let n = self.points as i64;
                    d = d.rem_euclid(n);
                    if 2 * d > n {
                        d -= n;
                    }
                }
                d as f64 * h
            })
            .collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.displacement(a, b).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Neighbor of `site` one step along `axis` (forward when `forward`),
    /// `None` across a Dirichlet wall.
    pub fn neighbor(&self, site: usize, axis: usize, forward: bool) -> Option<usize> {
        let mut idx = self.multi_index(site);
        let n = self.points;
        match (forward, self.boundary) {
            (true, _) if idx[axis] + 1 < n => idx[axis] += 1,
            (false, _) if idx[axis] > 0 => idx[axis] -= 1,
            (true, Boundary::Periodic) => idx[axis] = 0,
            (false, Boundary::Periodic) => idx[axis] = n - 1,
            _ => return None,
        }
        Some(self.site_of(&idx))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    PositionLattice,
    CustomOrthonormal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeOptions {
    pub mode_cap: usize,
    pub boundary: Boundary,
}

impl Default for LatticeOptions {
    fn default() -> Self {
        Self { mode_cap: DEFAULT_MODE_CAP, boundary: Boundary::Dirichlet }
    }
}

/// Finite orthonormal one-body basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneBodySpace {
    dim_r: usize,
    lattice: Option<Lattice>,
    basis_kind: BasisKind,
}

impl OneBodySpace {
    /// Dirichlet position lattice with the default mode cap.
    pub fn lattice(d: usize, n: usize, box_len: f64) -> Result<Self> {
        Self::lattice_with(d, n, box_len, LatticeOptions::default())
    }

    pub fn lattice_with(d: usize, n: usize, box_len: f64, opts: LatticeOptions) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return invalid(format!("spatial dimension must be 1, 2 or 3 (got {d})"));
        }
        if n < 2 {
            return invalid(format!("need at least 2 points per axis (got {n})"));
        }
        if !(box_len > 0.0 && box_len.is_finite()) {
            return invalid(format!("box length must be positive (got {box_len})"));
        }
        let dim_r = n.checked_pow(d as u32).unwrap_or(usize::MAX);
        if dim_r > opts.mode_cap {
            return Err(Error::CapExceeded { what: "lattice modes", value: dim_r, cap: opts.mode_cap });
        }
        let lattice = Lattice { dim: d, points: n, box_len, boundary: opts.boundary };
        Ok(Self { dim_r, lattice: Some(lattice), basis_kind: BasisKind::PositionLattice })
    }

    /// Abstract space of `r` orthonormal modes without geometry.
    pub fn modes(r: usize) -> Result<Self> {
        if r == 0 {
            return invalid("need at least one mode");
        }
        Ok(Self { dim_r: r, lattice: None, basis_kind: BasisKind::CustomOrthonormal })
    }

    pub fn dim(&self) -> usize {
        self.dim_r
    }

    pub fn basis_kind(&self) -> BasisKind {
        self.basis_kind
    }

    pub fn geometry(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub(crate) fn require_lattice(&self) -> Result<&Lattice> {
        self.lattice.as_ref().ok_or_else(|| Error::InvalidInput("operation needs a position lattice".into()))
    }

    /// Sampled mode functions, one column per mode.
    pub fn mode_functions(&self) -> CMat {
        let weight = self.lattice.as_ref().map_or(1.0, |l| l.cell_volume().sqrt().recip());
        CMat::identity(self.dim_r, self.dim_r).scale(weight)
    }

    /// Gram matrix of the mode functions under the lattice quadrature.
    pub fn overlap_matrix(&self) -> CMat {
        let f = self.mode_functions();
        let dv = self.lattice.as_ref().map_or(1.0, Lattice::cell_volume);
        (f.adjoint() * &f).scale(dv)
    }

    pub fn positions(&self) -> Result<Vec<Vec<f64>>> {
        let lat = self.require_lattice()?;
        Ok((0..self.dim_r).map(|s| lat.position(s)).collect())
    }

    /// Samples a function of position at every site.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let lat = self.require_lattice()?;
        Ok((0..self.dim_r).map(|s| f(&lat.position(s))).collect())
    }
}

/// Hermitian one-body matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyOperator {
    matrix: CMat,
    label: String,
}

impl OneBodyOperator {
    pub fn new(matrix: CMat, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return invalid("one-body operator must be square");
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let dev = hermiticity_deviation(&matrix);
        if dev > 1e-12 * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn zero(r: usize) -> Self {
        Self { matrix: CMat::zeros(r, r), label: "zero".into() }
    }

    pub fn identity(r: usize) -> Self {
        Self { matrix: CMat::identity(r, r), label: "identity".into() }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Self::new(&self.matrix + &other.matrix, format!("{} + {}", self.label, other.label))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { matrix: self.matrix.scale(s), label: format!("{s}*{}", self.label) }
    }

    /// `U A U*` for a unitary (or isometry) `u`.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        Self::new(u * &self.matrix * u.adjoint(), format!("U {} U*", self.label))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.matrix).0
    }
}

/// Discrete `-Δ/2` with the lattice's boundary condition.
pub fn kinetic_operator(space: &OneBodySpace) -> Result<OneBodyOperator> {
    let lat = space.require_lattice()?;
    let h2 = lat.spacing().powi(2);
    let r = space.dim();
    let mut m = CMat::zeros(r, r);
    for s in 0..r {
        m[(s, s)] += c(lat.dim as f64 / h2);
        for axis in 0..lat.dim {
            if let Some(t) = lat.neighbor(s, axis, true) {
                if t != s {
                    m[(s, t)] -= c(0.5 / h2);
                    m[(t, s)] -= c(0.5 / h2);
                }
            }
        }
    }
    OneBodyOperator::new(m, "kinetic")
}

/// Multiplication operator by sampled values (diagonal in the site basis).
pub fn potential_operator(space: &OneBodySpace, samples: &[f64]) -> Result<OneBodyOperator> {
    if samples.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: samples.len() });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return invalid("potential samples must be finite");
    }
    let d = CVec::from_iterator(samples.len(), samples.iter().map(|&v| c(v)));
    OneBodyOperator::new(CMat::from_diagonal(&d), "potential")
}

/// `-z / sqrt(|x|^2 + a^2)` at every site.
pub fn soft_coulomb_samples(space: &OneBodySpace, z: f64, a: f64) -> Result<Vec<f64>> {
    if a <= 0.0 {
        return invalid("soft-Coulomb regularization must be positive");
    }
    space.sample(|x| -z / (x.iter().map(|v| v * v).sum::<f64>() + a * a).sqrt())
}

/// `omega^2 |x|^2 / 2` at every site.
pub fn harmonic_samples(space: &OneBodySpace, omega: f64) -> Result<Vec<f64>> {
    space.sample(|x| 0.5 * omega * omega * x.iter().map(|v| v * v).sum::<f64>())
}

/// Square well of depth `depth` on `|x| <= radius`.
pub fn well_samples(space: &OneBodySpace, depth: f64, radius: f64) -> Result<Vec<f64>> {
    space.sample(|x| if x.iter().map(|v| v * v).sum::<f64>().sqrt() <= radius { -depth } else { 0.0 })
}

/// Sparse two-body operator in the tensor-product basis,
/// `V[i,j,k,l] = <e_i ⊗ e_j, W e_k ⊗ e_l>`.
///
/// Exchange symmetry `V[i,j,k,l] = V[j,i,l,k]` and Hermiticity
/// `V[i,j,k,l] = conj(V[k,l,i,j])` are enforced at construction.
#[derive(Debug, Clone)]
pub struct TwoBodyKernel {
    r: usize,
    statistics: Statistics,
    entries: Vec<(usize, usize, usize, usize, C64)>,
    lookup: HashMap<(usize, usize, usize, usize), C64>,
}

impl TwoBodyKernel {
    pub fn zero(r: usize, statistics: Statistics) -> Self {
        Self { r, statistics, entries: Vec::new(), lookup: HashMap::new() }
    }

    pub fn from_entries(
        r: usize,
        statistics: Statistics,
        entries: impl IntoIterator<Item = (usize, usize, usize, usize, C64)>,
    ) -> Result<Self> {
        let mut lookup: HashMap<(usize, usize, usize, usize), C64> = HashMap::new();
        for (i, j, k, l, v) in entries {
            if i >= r || j >= r || k >= r || l >= r {
                return invalid(format!("kernel index ({i},{j},{k},{l}) out of range for {r} modes"));
            }
            *lookup.entry((i, j, k, l)).or_insert(C64::new(0.0, 0.0)) += v;
        }
        lookup.retain(|_, v| v.norm() > 0.0);
        let scale = lookup.values().map(|v| v.norm()).fold(1.0, f64::max);
        let get = |key| lookup.get(&key).copied().unwrap_or_default();
        for (&(i, j, k, l), &v) in &lookup {
            let dev_swap = (v - get((j, i, l, k))).norm();
            let dev_herm = (v - get((k, l, i, j)).conj()).norm();
            if dev_swap > 1e-12 * scale {
                return invalid(format!("kernel not exchange-symmetric at ({i},{j},{k},{l})"));
            }
            if dev_herm > 1e-12 * scale {
                return Err(Error::NotHermitian { deviation: dev_herm });
            }
        }
        let mut entries: Vec<_> = lookup.iter().map(|(&(i, j, k, l), &v)| (i, j, k, l, v)).collect();
        entries.sort_by_key(|e| (e.0, e.1, e.2, e.3));
        Ok(Self { r, statistics, entries, lookup })
    }

    /// Multiplication by a pair potential `w(x_j - x_i)` on a position lattice.
    pub fn pair_potential(space: &OneBodySpace, statistics: Statistics, w: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let lat = space.require_lattice()?;
        let r = space.dim();
        let mut entries = Vec::new();
        for i in 0..r {
            for j in 0..r {
                let d = lat.displacement(i, j);
                let v = w(&d);
                let minus: Vec<f64> = d.iter().map(|x| -x).collect();
                let v_rev = w(&minus);
                if !v.is_finite() {
                    return invalid(format!("pair potential not finite at displacement {d:?}"));
                }
                if (v - v_rev).abs() > 1e-12 * v.abs().max(1.0) {
                    return invalid(format!("pair potential is not even: w({d:?}) != w(-x)"));
                }
                if v != 0.0 {
                    entries.push((i, j, i, j, c(v)));
                }
            }
        }
        Self::from_entries(r, statistics, entries)
    }

    /// `strength / sqrt(|x|^2 + a^2)`.
    pub fn soft_coulomb(space: &OneBodySpace, statistics: Statistics, strength: f64, a: f64) -> Result<Self> {
        if a <= 0.0 {
            return invalid("soft-Coulomb regularization must be positive");
        }
        Self::pair_potential(space, statistics, |x| strength / (x.iter().map(|v| v * v).sum::<f64>() + a * a).sqrt())
    }

    pub fn constant(space: &OneBodySpace, statistics: Statistics, value: f64) -> Result<Self> {
        Self::pair_potential(space, statistics, |_| value)
    }

    pub fn modes(&self) -> usize {
        self.r
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn with_statistics(&self, statistics: Statistics) -> Self {
        Self { statistics, ..self.clone() }
    }

    pub fn entries(&self) -> &[(usize, usize, usize, usize, C64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensor_element(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.lookup.get(&(i, j, k, l)).copied().unwrap_or_default()
    }

    /// Coefficient `W_{ij,kl}` (i <= j, k <= l) of the normal-ordered
    /// second quantization `Σ W_{ij,kl} a†_i a†_j a_l a_k`: the wedge matrix
    /// element for fermions, the vee matrix element divided by
    /// `(1+δ_ij)(1+δ_kl)` for bosons.
    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let direct = self.tensor_element(i, j, k, l);
        let exchange = self.tensor_element(i, j, l, k);
        match self.statistics {
            Statistics::Fermion => direct - exchange,
            Statistics::Boson => {
                let norm = if i == j { 2.0 } else { 1.0 } * if k == l { 2.0 } else { 1.0 };
                (direct + exchange) / norm
            }
        }
    }

    /// All nonzero ordered coefficients `((i,j),(k,l), W_{ij,kl})`.
    pub fn ordered_elements(&self) -> Vec<((usize, usize), (usize, usize), C64)> {
        let mut keys: Vec<((usize, usize), (usize, usize))> = self
            .entries
            .iter()
            .map(|&(i, j, k, l, _)| ((i.min(j), i.max(j)), (k.min(l), k.max(l))))
            .collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .filter_map(|(ij, kl)| {
                if self.statistics == Statistics::Fermion && (ij.0 == ij.1 || kl.0 == kl.1) {
                    return None;
                }
                let v = self.element(ij.0, ij.1, kl.0, kl.1);
                (v.norm() > 0.0).then_some((ij, kl, v))
            })
            .collect()
    }

    /// Dense `r² × r²` matrix on `h ⊗ h`, row index `i*r + j`.
    pub fn tensor_matrix(&self) -> CMat {
        let r = self.r;
        let mut m = CMat::zeros(r * r, r * r);
        for &(i, j, k, l, v) in &self.entries {
            m[(i * r + j, k * r + l)] += v;
        }
        m
    }

    /// Kernel in the orbital basis given by the columns of `phi` (r × m):
    /// `V'[a,b,c,d] = Σ conj(φ_ia) conj(φ_jb) φ_kc φ_ld V[i,j,k,l]`.
    pub fn rotated(&self, phi: &CMat) -> Result<Self> {
        if phi.nrows() != self.r {
            return Err(Error::DimensionMismatch { expected: self.r, found: phi.nrows() });
        }
        let m = phi.ncols();
        let mut dense = vec![C64::new(0.0, 0.0); m * m * m * m];
        for &(i, j, k, l, v) in &self.entries {
            for a in 0..m {
                let fa = phi[(i, a)].conj() * v;
                if fa.norm() == 0.0 {
                    continue;
                }
                for b in 0..m {
                    let fab = fa * phi[(j, b)].conj();
                    if fab.norm() == 0.0 {
                        continue;
                    }
                    for cc in 0..m {
                        let fabc = fab * phi[(k, cc)];
                        for d in 0..m {
                            dense[((a * m + b) * m + cc) * m + d] += fabc * phi[(l, d)];
                        }
                    }
                }
            }
        }
        let scale = dense.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let entries = (0..m)
            .flat_map(|a| (0..m).flat_map(move |b| (0..m).flat_map(move |cc| (0..m).map(move |d| (a, b, cc, d)))))
            .filter_map(|(a, b, cc, d)| {
                let v = dense[((a * m + b) * m + cc) * m + d];
                (v.norm() > 1e-15 * scale.max(1e-300)).then_some((a, b, cc, d, v))
            })
            .collect::<Vec<_>>();
        // Re-symmetrize to remove roundoff before validation.
        let mut sym: HashMap<(usize, usize, usize, usize), C64> = HashMap::new();
        for &(a, b, cc, d, v) in &entries {
            *sym.entry((a, b, cc, d)).or_default() += v * 0.25;
            *sym.entry((b, a, d, cc)).or_default() += v * 0.25;
            *sym.entry((cc, d, a, b)).or_default() += v.conj() * 0.25;
            *sym.entry((d, cc, b, a)).or_default() += v.conj() * 0.25;
        }
        Self::from_entries(m, self.statistics, sym.into_iter().map(|((a, b, cc, d), v)| (a, b, cc, d, v)))
    }

    /// True when the kernel only couples `(i,j) -> (i,j)` (multiplication operator).
    pub fn is_pair_diagonal(&self) -> bool {
        self.entries.iter().all(|&(i, j, k, l, _)| i == k && j == l)
    }
}

/// One-body localization operator `B` with `0 <= BB* <= 1`, together with
/// the complement `sqrt(1 - B*B)` that completes `f -> Bf ⊕ Cf` to an isometry.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationOperator {
    b: CMat,
    complement: CMat,
}

impl LocalizationOperator {
    pub fn new(b: CMat) -> Result<Self> {
        if !b.is_square() {
            return invalid("localization operator must be square");
        }
        let btb = b.adjoint() * &b;
        let (vals, _) = eigh(&btb);
        let max = vals.last().copied().unwrap_or(0.0);
        if max > 1.0 + 1e-12 {
            return Err(Error::NotContraction { max_eigenvalue: max });
        }
        let complement = crate::linalg::hermitian_map(&btb, |x| (1.0 - x.clamp(0.0, 1.0)).sqrt());
        Ok(Self { b, complement })
    }

    pub fn identity(r: usize) -> Self {
        Self { b: CMat::identity(r, r), complement: CMat::zeros(r, r) }
    }

    pub fn zero(r: usize) -> Self {
        Self { b: CMat::zeros(r, r), complement: CMat::identity(r, r) }
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn complement(&self) -> &CMat {
        &self.complement
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// The localizer `sqrt(1 - B*B)`, used for the complementary region.
    pub fn complement_localizer(&self) -> Self {
        let c2 = &self.complement * &self.complement;
        let complement = crate::linalg::hermitian_map(&(CMat::identity(self.dim(), self.dim()) - c2), |x| {
            x.clamp(0.0, 1.0).sqrt()
        });
        Self { b: self.complement.clone(), complement }
    }

    /// `self` applied after `first`: the localizer `B_self B_first`.
    pub fn after(&self, first: &Self) -> Result<Self> {
        Self::new(&self.b * &first.b)
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.b[(i, j)].norm() == 0.0))
    }

    /// Largest deviation of `C² + B*B` from the identity.
    pub fn complement_residual(&self) -> f64 {
        let n = self.dim();
        let m = &self.complement * &self.complement + self.b.adjoint() * &self.b - CMat::identity(n, n);
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Spectrum of `BB*`.
    pub fn bbstar_eigenvalues(&self) -> Vec<f64> {
        eigh(&(&self.b * self.b.adjoint())).0
    }
}

/// Diagonal window `B = diag(χ)`.
pub fn window_localizer(space: &OneBodySpace, chi: &[f64]) -> Result<LocalizationOperator> {
    if chi.len() != space.dim() {
        return Err(Error::DimensionMismatch { expected: space.dim(), found: chi.len() });
    }
    if let Some(bad) = chi.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return invalid(format!("window sample {bad} outside [0,1]"));
    }
    let b = CMat::from_diagonal(&CVec::from_iterator(chi.len(), chi.iter().map(|&v| c(v))));
    let comp = CMat::from_diagonal(&CVec::from_iterator(chi.len(), chi.iter().map(|&v| c((1.0 - v * v).max(0.0).sqrt()))));
    Ok(LocalizationOperator { b, complement: comp })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowProfile {
    /// Indicator of the ball `|x| <= R`.
    Sharp,
    /// `cos(π/2 · s(t))` with a C¹ smoothstep `s` across `R <= |x| <= 2R`.
    Smooth,
}

/// Partition of unity `χ_R² + η_R² = 1` centered at the origin.
pub fn ims_partition(
    space: &OneBodySpace,
    radius: f64,
    profile: WindowProfile,
) -> Result<(LocalizationOperator, LocalizationOperator)> {
    let lat = space.require_lattice()?;
    if !(radius > 0.0 && radius < 0.5 * lat.box_len) {
        return invalid(format!("IMS radius {radius} must lie in (0, L/2) with L = {}", lat.box_len));
    }
    let mut chi = Vec::with_capacity(space.dim());
    let mut eta = Vec::with_capacity(space.dim());
    for s in 0..space.dim() {
        let x = lat.position(s).iter().map(|v| v * v).sum::<f64>().sqrt();
        let t = match profile {
            WindowProfile::Sharp => f64::from(x > radius),
            WindowProfile::Smooth => ((x - radius) / radius).clamp(0.0, 1.0),
        };
        let (c_val, e_val) = if t == 0.0 {
            (1.0, 0.0)
        } else if t == 1.0 {
            (0.0, 1.0)
        } else {
            let angle = std::f64::consts::FRAC_PI_2 * t * t * (3.0 - 2.0 * t);
            (angle.cos(), angle.sin())
        };
        chi.push(c_val);
        eta.push(e_val);
    }
    Ok((window_localizer(space, &chi)?, window_localizer(space, &eta)?))
}

/// Residual of `A = χAχ + ηAη + ½[χ,[χ,A]] + ½[η,[η,A]]`, which holds for
/// every `A` whenever `χ² + η² = 1`.
pub fn ims_identity_residual(a: &OneBodyOperator, chi: &LocalizationOperator, eta: &LocalizationOperator) -> Result<f64> {
    if !chi.is_diagonal() || !eta.is_diagonal() {
        return invalid("IMS windows must be diagonal multiplication operators");
    }
    let n = a.dim();
    if chi.dim() != n || eta.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: chi.dim() });
    }
    let unity = chi.b() * chi.b() + eta.b() * eta.b() - CMat::identity(n, n);
    if unity.iter().any(|z| z.norm() > 1e-12) {
        return invalid("windows do not satisfy χ² + η² = 1");
    }
    let am = a.matrix();
    let comm = |x: &CMat, y: &CMat| x * y - y * x;
    let (x, y) = (chi.b(), eta.b());
    let residual = am
        - x * am * x
        - y * am * y
        - comm(x, &comm(x, am)).scale(0.5)
        - comm(y, &comm(y, am)).scale(0.5);
    Ok(residual.norm())
}
