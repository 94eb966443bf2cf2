//! Exact dynamics of a few coupled oscillators in a truncated number basis.
//!
//! Each site carries the states `|0⟩ .. |n-1⟩` of `b†b`, with
//! `q = (b + b†)/sqrt(2 ω0)` and `p = i sqrt(ω0/2) (b† - b)` for `ω0 = ω`.
//! The harmonic part of `H` is the exact projection of
//! `Σ p_x² + ω² q_x² + λ Σ_bonds (q_x - q_y)²` onto the truncated space;
//! potentials are applied to the truncated `q` (or `p`) by spectral calculus.
//!
//! `H` commutes with the reflection `x -> N-1-x`, so it is diagonalised in the
//! even and odd sectors separately.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::anharmonic::{PerturbationSpec, Placement, Variable};
use crate::error::{invalid, Error, Result};
use crate::torus::{Couplings, SiteMetric};
use crate::weyl::{norm_from_phase, symplectic_form, WeylFunction};

/// Largest tensor-space dimension diagonalised densely.
pub const MAX_DIM: usize = 20736;
pub const MAX_SITES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Open,
    Periodic,
}

/// Chain or ring of at most four sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmallLattice {
    n_sites: usize,
    boundary: Boundary,
}

impl SmallLattice {
    pub fn new(n_sites: usize, boundary: Boundary) -> Result<Self> {
        if n_sites == 0 || n_sites > MAX_SITES {
            return Err(invalid("sites", format!("need 1..={MAX_SITES} sites, got {n_sites}")));
        }
        Ok(Self { n_sites, boundary })
    }

    pub fn chain(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Open)
    }

    pub fn ring(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Periodic)
    }

    pub fn len(&self) -> usize {
        self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Bonds `(x, x+1)`; on a ring every site has a forward bond, so two
    /// sites share a double bond and a single site has none.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        match self.boundary {
            Boundary::Open => (0..n.saturating_sub(1)).map(|x| (x, x + 1)).collect(),
            Boundary::Periodic if n == 1 => Vec::new(),
            Boundary::Periodic => (0..n).map(|x| (x, (x + 1) % n)).collect(),
        }
    }
}

impl SiteMetric for SmallLattice {
    fn site_count(&self) -> usize {
        self.n_sites
    }

    fn distance(&self, x: usize, y: usize) -> usize {
        let d = x.abs_diff(y);
        match self.boundary {
            Boundary::Open => d,
            Boundary::Periodic => d.min(self.n_sites - d),
        }
    }
}

/// Truncated `q` and `p/i` on one site.
pub fn ladder_operators(n: usize, omega0: f64) -> (Mat<f64>, Mat<f64>) {
    let q = Mat::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt() / (2.0 * omega0).sqrt()
        } else {
            0.0
        }
    });
    // p = i sqrt(ω0/2) (b† - b): (b†)_{k+1,k} = sqrt(k+1)
    let p_im = Mat::from_fn(n, n, |i, j| {
        let s = (0.5 * omega0).sqrt();
        if i == j + 1 {
            s * (i as f64).sqrt()
        } else if j == i + 1 {
            -s * (j as f64).sqrt()
        } else {
            0.0
        }
    });
    (q, p_im)
}

/// Exact matrix elements of `q²` and `p²` between the first `n` number states.
fn squares(n: usize, omega0: f64) -> (Mat<f64>, Mat<f64>) {
    let entry = |i: usize, j: usize, sign: f64, scale: f64| {
        if i == j {
            scale * (2 * i + 1) as f64
        } else if i.abs_diff(j) == 2 {
            let k = i.min(j) as f64;
            sign * scale * ((k + 1.0) * (k + 2.0)).sqrt()
        } else {
            0.0
        }
    };
    let q2 = Mat::from_fn(n, n, |i, j| entry(i, j, 1.0, 0.5 / omega0));
    let p2 = Mat::from_fn(n, n, |i, j| entry(i, j, -1.0, 0.5 * omega0));
    (q2, p2)
}

fn real_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::Eigen(format!("{err:?}")))?;
    let s = e.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((values, e.U().to_owned()))
}

fn complex_eigen(m: &Mat<Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|err| Error::Eigen(format!("{err:?}")))?;
    let s = e.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, e.U().to_owned()))
}

/// `φ(M)` for a real symmetric `M`.
fn real_function(m: &Mat<f64>, phi: impl Fn(f64) -> f64) -> Result<Mat<f64>> {
    let (values, u) = real_eigen(m)?;
    let n = m.nrows();
    Ok(Mat::from_fn(n, n, |i, j| {
        (0..n).map(|k| u[(i, k)] * phi(values[k]) * u[(j, k)]).sum()
    }))
}

/// Row-major kron of real matrices.
fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let (m, n) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * m, a.ncols() * n, |i, j| {
        a[(i / m, j / n)] * b[(i % m, j % n)]
    })
}

/// `i^{l-k}` conjugation taking `-ω0 q` to `p`, on `sites` sites.
fn momentum_from_position(m: &Mat<f64>, n: usize, sites: usize) -> Mat<f64> {
    let total = |mut idx: usize| {
        let mut s = 0;
        for _ in 0..sites {
            s += idx % n;
            idx /= n;
        }
        s as i64
    };
    Mat::from_fn(m.nrows(), m.ncols(), |k, l| {
        // even potentials only couple states of equal total parity
        match (total(l) - total(k)).rem_euclid(4) {
            0 => m[(k, l)],
            2 => -m[(k, l)],
            _ => 0.0,
        }
    })
}

/// One reflection-parity sector: basis vectors `c1 e_{i1} + c2 e_{i2}`.
#[derive(Debug, Clone)]
struct Sector {
    members: Vec<(usize, f64, usize, f64)>,
    values: Vec<f64>,
    vectors: Mat<f64>,
}

#[derive(Debug, Clone)]
pub struct FockSystem {
    lattice: SmallLattice,
    trunc: usize,
    couplings: Couplings,
    perturbation: Option<PerturbationSpec>,
    omega0: f64,
    dim: usize,
    rows: Vec<Vec<(usize, f64)>>,
    sectors: Vec<Sector>,
    q: Mat<f64>,
    p_im: Mat<f64>,
}

pub fn build_system(
    lattice: SmallLattice,
    trunc: usize,
    couplings: Couplings,
    perturbation: Option<PerturbationSpec>,
) -> Result<FockSystem> {
    if trunc < 2 {
        return Err(invalid("trunc", format!("need at least 2 number states, got {trunc}")));
    }
    if couplings.nu() != 1 {
        return Err(invalid("couplings", "chains and rings take a single bond coupling"));
    }
    let n_sites = lattice.len();
    let dim = (0..n_sites).try_fold(1usize, |acc, _| acc.checked_mul(trunc));
    let dim = match dim {
        Some(d) if d <= MAX_DIM => d,
        _ => {
            return Err(Error::DimensionOverflow {
                dim: dim.unwrap_or(usize::MAX),
                limit: MAX_DIM,
            })
        }
    };
    if let Some(p) = &perturbation {
        if p.potential(0.0).is_none() {
            return Err(invalid("perturbation", "a tabulated transform does not define V"));
        }
    }
    let omega = couplings.omega();
    let omega0 = if omega > 0.0 { omega } else { couplings.c_max() };
    let lambda = couplings.lambda()[0];
    let (q, p_im) = ladder_operators(trunc, omega0);
    let (q2, p2) = squares(trunc, omega0);

    let mut asm = Assembler::new(n_sites, trunc, dim);
    let onsite = Mat::from_fn(trunc, trunc, |i, j| p2[(i, j)] + omega * omega * q2[(i, j)]);
    for x in 0..n_sites {
        asm.add(&[x], &onsite, 1.0);
    }
    let qq = kron(&q, &q);
    for &(x, y) in &lattice.bonds() {
        asm.add(&[x], &q2, lambda);
        asm.add(&[y], &q2, lambda);
        asm.add(&[x, y], &qq, -2.0 * lambda);
    }
    if let Some(p) = perturbation.as_ref().filter(|p| !p.is_zero()) {
        let v = |s: f64| p.potential(s).unwrap_or(0.0);
        let scale = if p.variable == Variable::Momentum { -omega0 } else { 1.0 };
        match p.placement {
            Placement::Site => {
                let mut local = real_function(&q.clone().map(|e| scale * e), v)?;
                if p.variable == Variable::Momentum {
                    local = momentum_from_position(&local, trunc, 1);
                }
                for x in 0..n_sites {
                    asm.add(&[x], &local, 1.0);
                }
            }
            Placement::Bond => {
                let eye = Mat::<f64>::identity(trunc, trunc);
                let diff = kron(&q, &eye) - kron(&eye, &q);
                let mut local = real_function(&diff.map(|e| scale * e), v)?;
                if p.variable == Variable::Momentum {
                    local = momentum_from_position(&local, trunc, 2);
                }
                for &(x, y) in &lattice.bonds() {
                    asm.add(&[x, y], &local, 1.0);
                }
            }
        }
    }
    let rows = asm.finish();
    check_symmetric(&rows)?;
    let sectors = reflection_sectors(n_sites, trunc, dim)
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|members| diagonalise_sector(&rows, members))
        .collect::<Result<Vec<_>>>()?;
    Ok(FockSystem {
        lattice,
        trunc,
        couplings,
        perturbation,
        omega0,
        dim,
        rows,
        sectors,
        q,
        p_im,
    })
}

/// Sparse accumulation of local operators embedded in the tensor space.
struct Assembler {
    n_sites: usize,
    trunc: usize,
    dim: usize,
    rows: Vec<std::collections::BTreeMap<usize, f64>>,
}

impl Assembler {
    fn new(n_sites: usize, trunc: usize, dim: usize) -> Self {
        Self {
            n_sites,
            trunc,
            dim,
            rows: vec![Default::default(); dim],
        }
    }

    fn add(&mut self, sites: &[usize], op: &Mat<f64>, coeff: f64) {
        let layout = LocalLayout::new(self.n_sites, self.trunc, sites);
        for i in 0..self.dim {
            let (li, base) = layout.split(i);
            for lj in 0..layout.local_dim {
                let v = op[(li, lj)];
                if v != 0.0 {
                    *self.rows[i].entry(base + layout.offsets[lj]).or_insert(0.0) += coeff * v;
                }
            }
        }
    }

    fn finish(self) -> Vec<Vec<(usize, f64)>> {
        self.rows
            .into_iter()
            .map(|r| r.into_iter().filter(|(_, v)| *v != 0.0).collect())
            .collect()
    }
}

/// Digit bookkeeping for operators acting on a subset of sites.
/// Site 0 is the most significant digit of a basis index.
struct LocalLayout {
    strides: Vec<usize>,
    local_dim: usize,
    offsets: Vec<usize>,
    trunc: usize,
}

impl LocalLayout {
    fn new(n_sites: usize, trunc: usize, sites: &[usize]) -> Self {
        let strides: Vec<usize> = sites.iter().map(|&x| trunc.pow((n_sites - 1 - x) as u32)).collect();
        let local_dim = trunc.pow(sites.len() as u32);
        let offsets = (0..local_dim)
            .map(|mut l| {
                let mut off = 0;
                for s in strides.iter().rev() {
                    off += (l % trunc) * s;
                    l /= trunc;
                }
                off
            })
            .collect();
        Self {
            strides,
            local_dim,
            offsets,
            trunc,
        }
    }

    /// Local index of basis state `i` and `i` with the local digits cleared.
    fn split(&self, i: usize) -> (usize, usize) {
        let mut local = 0;
        let mut base = i;
        for s in &self.strides {
            let d = (i / s) % self.trunc;
            local = local * self.trunc + d;
            base -= d * s;
        }
        (local, base)
    }
}

fn check_symmetric(rows: &[Vec<(usize, f64)>]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            let back = rows[j]
                .binary_search_by_key(&i, |e| e.0)
                .map(|k| rows[j][k].1)
                .unwrap_or(0.0);
            if (v - back).abs() > 1e-12 * (1.0 + v.abs()) {
                return Err(Error::Eigen(format!("assembled H is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn reflect(i: usize, n_sites: usize, trunc: usize) -> usize {
    let mut digits = Vec::with_capacity(n_sites);
    let mut r = i;
    for _ in 0..n_sites {
        digits.push(r % trunc);
        r /= trunc;
    }
    // digits are least significant first; reading them in that order reverses the sites
    digits.iter().fold(0, |acc, d| acc * trunc + d)
}

fn reflection_sectors(n_sites: usize, trunc: usize, dim: usize) -> [Vec<(usize, f64, usize, f64)>; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for i in 0..dim {
        let j = reflect(i, n_sites, trunc);
        if j == i {
            even.push((i, 1.0, i, 0.0));
        } else if i < j {
            even.push((i, h, j, h));
            odd.push((i, h, j, -h));
        }
    }
    [even, odd]
}

fn diagonalise_sector(rows: &[Vec<(usize, f64)>], members: Vec<(usize, f64, usize, f64)>) -> Result<Sector> {
    let d = members.len();
    // coefficient of each basis state in each member of this sector
    let mut slot = vec![None; rows.len()];
    for (a, &(i1, c1, i2, c2)) in members.iter().enumerate() {
        slot[i1] = Some((a, c1));
        if c2 != 0.0 {
            slot[i2] = Some((a, c2));
        }
    }
    let mut h = Mat::<f64>::zeros(d, d);
    for (b, &(i1, c1, i2, c2)) in members.iter().enumerate() {
        for (i, c) in [(i1, c1), (i2, c2)] {
            if c == 0.0 {
                continue;
            }
            for &(k, v) in &rows[i] {
                if let Some((a, ca)) = slot[k] {
                    h[(a, b)] += ca * v * c;
                }
            }
        }
    }
    let (values, vectors) = real_eigen(&h)?;
    Ok(Sector {
        members,
        values,
        vectors,
    })
}

/// Complex vectors stored as columns of separate real and imaginary parts.
#[derive(Debug, Clone)]
pub struct StateBatch {
    pub re: Mat<f64>,
    pub im: Mat<f64>,
}

impl StateBatch {
    pub fn zeros(dim: usize, cols: usize) -> Self {
        Self {
            re: Mat::zeros(dim, cols),
            im: Mat::zeros(dim, cols),
        }
    }

    pub fn from_columns(cols: &[Vec<Complex64>]) -> Self {
        let dim = cols.first().map_or(0, |c| c.len());
        Self {
            re: Mat::from_fn(dim, cols.len(), |i, j| cols[j][i].re),
            im: Mat::from_fn(dim, cols.len(), |i, j| cols[j][i].im),
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.re.nrows())
            .map(|i| Complex64::new(self.re[(i, j)], self.im[(i, j)]))
            .collect()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    fn minus(&self, other: &Self) -> Self {
        Self {
            re: &self.re - &other.re,
            im: &self.im - &other.im,
        }
    }
}

impl FockSystem {
    pub fn lattice(&self) -> SmallLattice {
        self.lattice
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn perturbation(&self) -> Option<&PerturbationSpec> {
        self.perturbation.as_ref()
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    /// Single-site truncated `q`.
    pub fn position_operator(&self) -> &Mat<f64> {
        &self.q
    }

    /// Single-site truncated `p / i`.
    pub fn momentum_operator_im(&self) -> &Mat<f64> {
        &self.p_im
    }

    /// Dense `H`; meant for small systems.
    pub fn hamiltonian_dense(&self) -> Mat<f64> {
        let mut h = Mat::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                h[(i, j)] = v;
            }
        }
        h
    }

    /// All eigenvalues of `H`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self.sectors.iter().flat_map(|s| s.values.clone()).collect();
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn ground_state(&self) -> Vec<Complex64> {
        let (s, _) = self
            .sectors
            .iter()
            .enumerate()
            .map(|(k, s)| (k, s.values[0]))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one sector");
        let sector = &self.sectors[s];
        let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
        for (a, &(i1, c1, i2, c2)) in sector.members.iter().enumerate() {
            let u = sector.vectors[(a, 0)];
            v[i1] += c1 * u;
            if c2 != 0.0 {
                v[i2] += c2 * u;
            }
        }
        v
    }

    /// `e^{-itH}` applied to every column.
    pub fn propagate(&self, states: &StateBatch, t: f64) -> StateBatch {
        let k = states.ncols();
        let mut out = StateBatch::zeros(self.dim, k);
        for sector in &self.sectors {
            let d = sector.members.len();
            let gather = |m: &Mat<f64>| {
                Mat::from_fn(d, k, |a, j| {
                    let (i1, c1, i2, c2) = sector.members[a];
                    c1 * m[(i1, j)] + c2 * m[(i2, j)]
                })
            };
            let u = &sector.vectors;
            let wr = u.transpose() * gather(&states.re);
            let wi = u.transpose() * gather(&states.im);
            // multiply mode by mode with e^{-i t E}
            let (mut yr, mut yi) = (Mat::zeros(d, k), Mat::zeros(d, k));
            for a in 0..d {
                let (s, c) = (t * sector.values[a]).sin_cos();
                for j in 0..k {
                    yr[(a, j)] = c * wr[(a, j)] + s * wi[(a, j)];
                    yi[(a, j)] = c * wi[(a, j)] - s * wr[(a, j)];
                }
            }
            let zr = u * yr;
            let zi = u * yi;
            for (a, &(i1, c1, i2, c2)) in sector.members.iter().enumerate() {
                for j in 0..k {
                    out.re[(i1, j)] += c1 * zr[(a, j)];
                    out.im[(i1, j)] += c1 * zi[(a, j)];
                    if c2 != 0.0 {
                        out.re[(i2, j)] += c2 * zr[(a, j)];
                        out.im[(i2, j)] += c2 * zi[(a, j)];
                    }
                }
            }
        }
        out
    }

    /// `exp(i (a q + b p))` on one site.
    pub fn local_weyl(&self, value: Complex64) -> Result<Mat<Complex64>> {
        let n = self.trunc;
        let gen = Mat::from_fn(n, n, |i, j| {
            Complex64::new(value.re * self.q[(i, j)], value.im * self.p_im[(i, j)])
        });
        let (vals, u) = complex_eigen(&gen)?;
        Ok(Mat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| u[(i, k)] * Complex64::from_polar(1.0, vals[k]) * u[(j, k)].conj())
                .sum()
        }))
    }

    /// Applies `W(f)` to every column.
    pub fn apply_weyl(&self, f: &WeylFunction, states: &StateBatch) -> Result<StateBatch> {
        self.check_function(f)?;
        let mut out = states.clone();
        for &x in f.support() {
            let w = self.local_weyl(f.value(x))?;
            out = self.apply_local(x, &w, &out);
        }
        Ok(out)
    }

    fn apply_local(&self, x: usize, op: &Mat<Complex64>, states: &StateBatch) -> StateBatch {
        let layout = LocalLayout::new(self.lattice.len(), self.trunc, &[x]);
        let k = states.ncols();
        let mut out = StateBatch::zeros(self.dim, k);
        for i in 0..self.dim {
            let (li, base) = layout.split(i);
            for lj in 0..self.trunc {
                let w = op[(li, lj)];
                if w == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = base + layout.offsets[lj];
                for j in 0..k {
                    let (vr, vi) = (states.re[(src, j)], states.im[(src, j)]);
                    out.re[(i, j)] += w.re * vr - w.im * vi;
                    out.im[(i, j)] += w.re * vi + w.im * vr;
                }
            }
        }
        out
    }

    fn check_function(&self, f: &WeylFunction) -> Result<()> {
        if f.site_count() != self.lattice.len() {
            return Err(Error::LatticeMismatch(format!(
                "function on {} sites, system has {}",
                f.site_count(),
                self.lattice.len()
            )));
        }
        Ok(())
    }

    /// `τ_t(W(f)) = e^{itH} W(f) e^{-itH}` applied to every column.
    pub fn apply_evolved_weyl(&self, f: &WeylFunction, t: f64, states: &StateBatch) -> Result<StateBatch> {
        let forward = self.propagate(states, t);
        let kicked = self.apply_weyl(f, &forward)?;
        Ok(self.propagate(&kicked, -t))
    }

    /// `e^{itH} A e^{-itH}` for a dense operator `A`.
    pub fn evolve_observable(&self, a: &Mat<Complex64>, t: f64) -> Result<Mat<Complex64>> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::LatticeMismatch(format!(
                "operator is {}x{}, space has dimension {}",
                a.nrows(),
                a.ncols(),
                self.dim
            )));
        }
        let batch = |m: &Mat<Complex64>| StateBatch {
            re: Mat::from_fn(self.dim, self.dim, |i, j| m[(i, j)].re),
            im: Mat::from_fn(self.dim, self.dim, |i, j| m[(i, j)].im),
        };
        let adjoint =
            |s: &StateBatch| Mat::from_fn(self.dim, self.dim, |i, j| Complex64::new(s.re[(j, i)], -s.im[(j, i)]));
        // (e^{itH} (e^{itH} A)^†)^† = e^{itH} A e^{-itH}
        let left = self.propagate(&batch(a), -t);
        let both = self.propagate(&batch(&adjoint(&left)), -t);
        Ok(adjoint(&both))
    }

    /// Product number states with total occupation at most `max_total`.
    pub fn probe_states(&self, max_total: usize) -> StateBatch {
        let n_sites = self.lattice.len();
        let mut cols = Vec::new();
        for i in 0..self.dim {
            let mut r = i;
            let mut total = 0;
            for _ in 0..n_sites {
                total += r % self.trunc;
                r /= self.trunc;
            }
            if total <= max_total {
                cols.push(i);
            }
        }
        let mut b = StateBatch::zeros(self.dim, cols.len());
        for (j, &i) in cols.iter().enumerate() {
            b.re[(i, j)] = 1.0;
        }
        b
    }

    /// Largest singular value of `[τ_t(W(f)), W(g)]` restricted to the probe states.
    pub fn commutator_norm(&self, f: &WeylFunction, g: &WeylFunction, t: f64, probes: &StateBatch) -> Result<f64> {
        self.check_function(g)?;
        let first = self.apply_evolved_weyl(f, t, &self.apply_weyl(g, probes)?)?;
        let second = self.apply_weyl(g, &self.apply_evolved_weyl(f, t, probes)?)?;
        largest_singular_value(&first.minus(&second))
    }

    /// `‖[τ_t(W(f)), W(g)]‖` on a time grid for disjointly supported `f`, `g`.
    pub fn commutator_front(
        &self,
        f: &WeylFunction,
        g: &WeylFunction,
        times: &[f64],
        probes: &StateBatch,
    ) -> Result<Vec<f64>> {
        if f.support().iter().any(|x| g.support().contains(x)) {
            return Err(Error::Precondition("supports of f and g overlap".into()));
        }
        times.iter().map(|&t| self.commutator_norm(f, g, t, probes)).collect()
    }

    /// `⟨ψ| W(f) |ψ⟩`
    pub fn weyl_expectation(&self, f: &WeylFunction, psi: &[Complex64]) -> Result<Complex64> {
        let b = StateBatch::from_columns(&[psi.to_vec()]);
        let w = self.apply_weyl(f, &b)?.column(0);
        Ok(psi.iter().zip(&w).map(|(a, b)| a.conj() * b).sum())
    }
}

fn largest_singular_value(m: &StateBatch) -> Result<f64> {
    let k = m.ncols();
    let gram_re = m.re.transpose() * &m.re + m.im.transpose() * &m.im;
    let gram_im = m.re.transpose() * &m.im - m.im.transpose() * &m.re;
    let gram = Mat::from_fn(k, k, |i, j| Complex64::new(gram_re[(i, j)], gram_im[(i, j)]));
    let (vals, _) = complex_eigen(&gram)?;
    Ok(vals.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// `‖[q, p] - i‖` (Frobenius) on the lowest `n - 2` number states.
pub fn ccr_residual(n: usize, omega0: f64) -> f64 {
    let (q, p_im) = ladder_operators(n, omega0);
    let m = n.saturating_sub(2);
    let mut sum = 0.0;
    for i in 0..m {
        for j in 0..m {
            // [q, p] = i [q, p_im]
            let c: f64 = (0..n)
                .map(|k| q[(i, k)] * p_im[(k, j)] - p_im[(i, k)] * q[(k, j)])
                .sum();
            let target = if i == j { 1.0 } else { 0.0 };
            sum += (c - target).powi(2);
        }
    }
    sum.sqrt()
}

/// Largest change between two runs of the same series at truncations `n` and `n_next`.
pub fn truncation_gate(coarse: &[f64], fine: &[f64], n: usize, n_next: usize, tolerance: f64) -> Result<f64> {
    let change = coarse.iter().zip(fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if change < tolerance {
        Ok(change)
    } else {
        Err(Error::Unconverged {
            n,
            n_next,
            change,
            tolerance,
        })
    }
}

/// Required agreement between truncations `n` and `n + GATE_STEP`.
pub const GATE_TOLERANCE: f64 = 1e-4;
pub const GATE_STEP: usize = 4;

/// Commutator norms at truncation `n`, checked against `n + GATE_STEP`.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedFront {
    pub trunc: usize,
    pub values: Vec<f64>,
    pub refined: Vec<f64>,
    /// largest change between the two truncations
    pub change: f64,
}

impl GatedFront {
    /// Reported truncation tolerance: twice the observed change, which covers
    /// the remaining error whenever successive changes shrink by at least half.
    pub fn tolerance(&self) -> f64 {
        2.0 * self.change
    }
}

/// Runs `commutator_front` at `trunc` and `trunc + GATE_STEP` with probes of
/// total occupation at most `probe_occupation`.
#[allow(clippy::too_many_arguments)]
pub fn gated_front(
    lattice: SmallLattice,
    trunc: usize,
    couplings: &Couplings,
    perturbation: Option<&PerturbationSpec>,
    f: &WeylFunction,
    g: &WeylFunction,
    times: &[f64],
    probe_occupation: usize,
) -> Result<GatedFront> {
    let run = |n: usize| -> Result<Vec<f64>> {
        let sys = build_system(lattice, n, couplings.clone(), perturbation.cloned())?;
        sys.commutator_front(f, g, times, &sys.probe_states(probe_occupation))
    };
    let values = run(trunc)?;
    let refined = run(trunc + GATE_STEP)?;
    let change = truncation_gate(&values, &refined, trunc, trunc + GATE_STEP, GATE_TOLERANCE)?;
    Ok(GatedFront {
        trunc,
        values,
        refined,
        change,
    })
}

/// Exact harmonic `‖[τ_t(W(f)), W(g)]‖` on a chain or ring, from the classical
/// evolution `da/dt = -2Kb`, `db/dt = 2a` of `f = a + ib` in the normal modes of
/// `K = ω² + λ Σ_bonds (e_x - e_y)(e_x - e_y)^T`.
pub fn harmonic_reference(
    lattice: &SmallLattice,
    couplings: &Couplings,
    f: &WeylFunction,
    g: &WeylFunction,
    t: f64,
) -> Result<f64> {
    let n = lattice.len();
    if f.site_count() != n || g.site_count() != n {
        return Err(Error::LatticeMismatch("functions do not live on this lattice".into()));
    }
    let omega = couplings.omega();
    let lambda = couplings.lambda()[0];
    let mut k = Mat::from_fn(n, n, |i, j| if i == j { omega * omega } else { 0.0 });
    for &(x, y) in &lattice.bonds() {
        k[(x, x)] += lambda;
        k[(y, y)] += lambda;
        k[(x, y)] -= lambda;
        k[(y, x)] -= lambda;
    }
    let (vals, u) = real_eigen(&k)?;
    let mut ft = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..n {
        let gamma = vals[m].max(0.0).sqrt();
        let alpha: f64 = (0..n).map(|x| u[(x, m)] * f.value(x).re).sum();
        let beta: f64 = (0..n).map(|x| u[(x, m)] * f.value(x).im).sum();
        let (a_t, b_t) = if gamma == 0.0 {
            (alpha, beta + 2.0 * t * alpha)
        } else {
            let (s, c) = (2.0 * gamma * t).sin_cos();
            (alpha * c - gamma * beta * s, beta * c + alpha * s / gamma)
        };
        for (x, v) in ft.iter_mut().enumerate() {
            *v += u[(x, m)] * Complex64::new(a_t, b_t);
        }
    }
    Ok(norm_from_phase(symplectic_form(g, &WeylFunction::full(ft))?))
}

/// Least-squares `C` in `values ≈ C |t|` over `|t| <= t_max`, with the relative
/// RMS residual of that fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimeFit {
    pub slope: f64,
    pub relative_residual: f64,
}

pub fn short_time_fit(times: &[f64], values: &[f64], t_max: f64) -> Result<ShortTimeFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| t.abs() <= t_max && **t != 0.0)
        .map(|(t, v)| (t.abs(), *v))
        .collect();
    if pts.is_empty() {
        return Err(invalid("times", format!("no nonzero grid times with |t| <= {t_max}")));
    }
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let slope = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx;
    let ss: f64 = pts.iter().map(|p| (p.1 - slope * p.0).powi(2)).sum();
    let norm: f64 = pts.iter().map(|p| p.1 * p.1).sum();
    let relative_residual = if norm > 0.0 { (ss / norm).sqrt() } else { 0.0 };
    Ok(ShortTimeFit {
        slope,
        relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anharmonic::PerturbationSpec;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_oscillator_spectrum() {
        let c = Couplings::isotropic(1.0, 0.0, 1).unwrap();
        let sys = build_system(SmallLattice::chain(1).unwrap(), 40, c, None).unwrap();
        let e = sys.eigenvalues();
        assert!((e[0] - 1.0).abs() < 1e-10);
        for (k, ek) in e.iter().enumerate() {
            assert!((ek - (2 * k + 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn two_site_ring_spectrum() {
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let sys = build_system(SmallLattice::ring(2).unwrap(), 30, c, None).unwrap();
        let (g0, g1) = (1.0, 5f64.sqrt());
        let mut want: Vec<f64> = (0..10)
            .flat_map(|a| (0..10).map(move |b| g0 * (2 * a + 1) as f64 + g1 * (2 * b + 1) as f64))
            .collect();
        want.sort_by(f64::total_cmp);
        for (got, w) in sys.eigenvalues().iter().zip(&want).take(5) {
            assert!((got - w).abs() < 1e-9, "{got} vs {w}");
        }
    }

    #[test]
    fn zero_perturbation_is_harmonic() {
        let c = Couplings::isotropic(1.0, 0.7, 1).unwrap();
        let lat = SmallLattice::chain(2).unwrap();
        let h = build_system(lat, 6, c.clone(), None).unwrap().hamiltonian_dense();
        let p = PerturbationSpec::gaussian(0.0).unwrap();
        let h0 = build_system(lat, 6, c, Some(p)).unwrap().hamiltonian_dense();
        assert_eq!(h, h0);
    }

    #[test]
    fn sectors_reproduce_dense_spectrum() {
        let c = Couplings::isotropic(0.8, 0.6, 1).unwrap();
        let p = PerturbationSpec::gaussian(0.4).unwrap();
        let sys = build_system(SmallLattice::chain(3).unwrap(), 5, c, Some(p)).unwrap();
        let (dense, _) = real_eigen(&sys.hamiltonian_dense()).unwrap();
        for (a, b) in dense.iter().zip(sys.eigenvalues()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn propagation_matches_dense_exponential() {
        let c = Couplings::isotropic(1.0, 0.5, 1).unwrap();
        let p = PerturbationSpec::cosine(0.3, 1.1)
            .unwrap()
            .placed(Placement::Bond, Variable::Momentum);
        let sys = build_system(SmallLattice::ring(3).unwrap(), 4, c, Some(p)).unwrap();
        let (vals, u) = real_eigen(&sys.hamiltonian_dense()).unwrap();
        let psi: Vec<Complex64> = (0..sys.dim())
            .map(|i| c64((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let t = 0.7;
        let got = sys
            .propagate(&StateBatch::from_columns(std::slice::from_ref(&psi)), t)
            .column(0);
        for i in 0..sys.dim() {
            let want: Complex64 = (0..sys.dim())
                .map(|m| {
                    let overlap: Complex64 = (0..sys.dim()).map(|j| u[(j, m)] * psi[j]).sum();
                    u[(i, m)] * Complex64::from_polar(1.0, -t * vals[m]) * overlap
                })
                .sum();
            assert!((got[i] - want).norm() < 1e-10);
        }
    }

    #[test]
    fn observable_evolution_is_unitary() {
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let sys = build_system(SmallLattice::chain(2).unwrap(), 5, c, None).unwrap();
        let d = sys.dim();
        let a = Mat::from_fn(d, d, |i, j| c64((i * j) as f64 * 0.1, i as f64 - j as f64));
        assert!((sys.evolve_observable(&a, 0.0).unwrap() - &a).norm_max() < 1e-12);
        let at = sys.evolve_observable(&a, 1.3).unwrap();
        let sv = |m: &Mat<Complex64>| m.singular_values().unwrap();
        for (x, y) in sv(&a).iter().zip(sv(&at)) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_commutator() {
        assert!(ccr_residual(30, 1.0) < 1e-10);
        assert!(ccr_residual(30, 2.7) < 1e-10);
    }

    #[test]
    fn local_weyl_is_unitary_and_displaces() {
        let c = Couplings::isotropic(1.0, 0.0, 1).unwrap();
        let sys = build_system(SmallLattice::chain(1).unwrap(), 40, c, None).unwrap();
        let f = WeylFunction::delta(1, 0, c64(0.3, -0.2)).unwrap();
        // vacuum expectation exp(-(a²/(2ω) + b²ω/2)/2) for the m = 1/2 oscillator
        let psi = sys.ground_state();
        let e = sys.weyl_expectation(&f, &psi).unwrap();
        let want = (-(0.09 / 2.0 + 0.04 / 2.0) / 2.0f64).exp();
        assert!((e.re - want).abs() < 1e-10 && e.im.abs() < 1e-10);
    }

    #[test]
    fn dimension_limit() {
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        assert!(matches!(
            build_system(SmallLattice::chain(4).unwrap(), 13, c.clone(), None),
            Err(Error::DimensionOverflow { .. })
        ));
        assert!(SmallLattice::chain(5).is_err());
        let tab = PerturbationSpec::new(crate::anharmonic::PotentialProfile::Tabulated {
            w: vec![0.0, 1.0],
            abs_vhat: vec![1.0, 0.0],
        })
        .unwrap();
        assert!(build_system(SmallLattice::chain(1).unwrap(), 4, c, Some(tab)).is_err());
    }

    #[test]
    fn ring_metric_and_bonds() {
        let r = SmallLattice::ring(4).unwrap();
        assert_eq!(r.distance(0, 3), 1);
        assert_eq!(r.distance(0, 2), 2);
        assert_eq!(SmallLattice::ring(2).unwrap().bonds(), vec![(0, 1), (1, 0)]);
        assert_eq!(SmallLattice::chain(3).unwrap().bonds(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn harmonic_commutator_against_reference() {
        let c = Couplings::isotropic(1.0, 0.5, 1).unwrap();
        let lat = SmallLattice::chain(3).unwrap();
        let sys = build_system(lat, 16, c.clone(), None).unwrap();
        let f = WeylFunction::delta(3, 0, c64(0.4, 0.0)).unwrap();
        let g = WeylFunction::delta(3, 2, c64(0.0, 0.4)).unwrap();
        let probes = sys.probe_states(1);
        let times = [0.0, 0.3, 0.8];
        let got = sys.commutator_front(&f, &g, &times, &probes).unwrap();
        assert!(got[0].abs() < 1e-12);
        for (t, v) in times.iter().zip(&got) {
            let want = harmonic_reference(&lat, &c, &f, &g, *t).unwrap();
            assert!((v - want).abs() < 1e-6, "t={t}: {v} vs {want}");
        }
        assert!(sys.commutator_front(&f, &f, &times, &probes).is_err());
    }

    #[test]
    fn gate() {
        assert!(truncation_gate(&[0.1, 0.2], &[0.1, 0.20005], 16, 20, 1e-4).is_ok());
        assert!(matches!(
            truncation_gate(&[0.1], &[0.2], 16, 20, 1e-4),
            Err(Error::Unconverged { .. })
        ));
    }

    #[test]
    fn linear_fit() {
        let times = [0.0, 0.01, 0.02, 0.03];
        let fit = short_time_fit(&times, &[0.0, 0.02, 0.04, 0.06], 0.05).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && fit.relative_residual < 1e-12);
    }
}
