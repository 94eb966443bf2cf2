//! Finite Fourier-sum kernels of the harmonic lattice.
//!
//! With `S_m(t, x) = |Λ|^{-1} Σ_k γ(k)^m e^{i k·x - 2 i γ(k) t}` the three real
//! kernels are
//!
//! ```text
//! H0(t,x)  = Re S_0(t,x)
//! H1(t,x)  = Im S_1(t,x)
//! Hm1(t,x) = Im S_{-1}(t,x)
//! ```
//!
//! and the evolution kernels of a Weyl argument are
//! `h1 = H0 + (i/2)(H1 + Hm1)`, `h2 = (i/2)(H1 - Hm1)`.
//!
//! Two evaluation paths are provided. [`EvalPath::Direct`] sums over the dual
//! grid for every site; [`EvalPath::Transform`] evaluates the same finite sum
//! with one inverse FFT per axis. Both implement the exact finite-lattice sum.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Error, Result};
use crate::torus::{dispersion_table, Couplings, LatticeShape, TorusLattice};

/// Power of `γ(k)` weighting a Fourier sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    /// `m = -1`
    Inverse,
    /// `m = 0`
    Unit,
    /// `m = 1`
    Gamma,
}

impl Order {
    pub const ALL: [Order; 3] = [Order::Inverse, Order::Unit, Order::Gamma];

    pub fn from_index(m: i32) -> Result<Self> {
        match m {
            -1 => Ok(Order::Inverse),
            0 => Ok(Order::Unit),
            1 => Ok(Order::Gamma),
            other => Err(invalid("m", format!("order must be -1, 0 or 1, got {other}"))),
        }
    }

    pub fn index(self) -> i32 {
        match self {
            Order::Inverse => -1,
            Order::Unit => 0,
            Order::Gamma => 1,
        }
    }

    fn kind(self) -> KernelKind {
        match self {
            Order::Inverse => KernelKind::Hm1,
            Order::Unit => KernelKind::H0,
            Order::Gamma => KernelKind::H1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    H0,
    H1,
    Hm1,
    /// `h_{1,t}`
    Evo1,
    /// `h_{2,t}`
    Evo2,
    /// `h_{0,1,t}`: massless variant with the zero mode treated separately.
    ZeroEvo1,
    /// `h_{0,2,t}`
    ZeroEvo2,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::H0 => "H0",
            KernelKind::H1 => "H1",
            KernelKind::Hm1 => "Hm1",
            KernelKind::Evo1 => "h1",
            KernelKind::Evo2 => "h2",
            KernelKind::ZeroEvo1 => "h01",
            KernelKind::ZeroEvo2 => "h02",
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, KernelKind::H0 | KernelKind::H1 | KernelKind::Hm1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalPath {
    Direct,
    #[default]
    Transform,
}

/// A kernel sampled on every site of a torus at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    t: f64,
    kind: KernelKind,
    values: Vec<Complex64>,
    couplings: Couplings,
    shape: LatticeShape,
}

impl KernelField {
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, site: usize) -> Complex64 {
        self.values[site]
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn shape(&self) -> LatticeShape {
        self.shape
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest `|values[x] - values[-x]|`.
    pub fn evenness_defect(&self, lat: &TorusLattice) -> f64 {
        (0..self.values.len())
            .map(|i| (self.values[i] - self.values[lat.neg(i)]).norm())
            .fold(0.0, f64::max)
    }

    /// Real parts; meaningful for the `H` kernels, which are real by construction.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
}

/// Evaluates `S_m(t, x)` on all sites.
fn mode_sum(
    lat: &TorusLattice,
    gamma: &[f64],
    order: Order,
    t: f64,
    skip_zero_mode: bool,
    path: EvalPath,
) -> Vec<Complex64> {
    let n = lat.len();
    let zero = lat.origin();
    let weights: Vec<Complex64> = gamma
        .iter()
        .enumerate()
        .map(|(k, &g)| {
            if skip_zero_mode && k == zero {
                return Complex64::new(0.0, 0.0);
            }
            let w = match order {
                Order::Unit => 1.0,
                Order::Gamma => g,
                Order::Inverse => 1.0 / g,
            };
            Complex64::from_polar(w, -2.0 * g * t)
        })
        .collect();
    let mut out = match path {
        EvalPath::Direct => direct_sum(lat, &weights),
        EvalPath::Transform => transform_sum(lat, &weights),
    };
    let inv = 1.0 / n as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    out
}

/// `out[x] = Σ_k w[k] e^{i k·x}` by explicit summation.
fn direct_sum(lat: &TorusLattice, weights: &[Complex64]) -> Vec<Complex64> {
    let side = lat.side();
    let l = lat.half_side() as i64;
    // phase[a][b] = e^{i π (a-L+1)(b-L+1) / L} for one axis
    let phase: Vec<Complex64> = (0..side * side)
        .map(|ab| {
            let a = (ab / side) as i64 - l + 1;
            let b = (ab % side) as i64 - l + 1;
            let arg = PI * ((a * b).rem_euclid(2 * l)) as f64 / l as f64;
            Complex64::from_polar(1.0, arg)
        })
        .collect();
    let offsets: Vec<Vec<usize>> = (0..lat.len())
        .map(|i| lat.coords(i).iter().map(|&c| (c + l - 1) as usize).collect())
        .collect();
    (0..lat.len())
        .map(|x| {
            let ox = &offsets[x];
            weights
                .iter()
                .zip(&offsets)
                .map(|(w, ok)| {
                    let e = ox
                        .iter()
                        .zip(ok)
                        .fold(Complex64::new(1.0, 0.0), |acc, (&a, &b)| acc * phase[a * side + b]);
                    w * e
                })
                .sum()
        })
        .collect()
}

/// Position of site `i` in the FFT layout (per-axis index `x mod 2L`).
fn fft_layout(lat: &TorusLattice) -> Vec<usize> {
    let side = lat.side() as i64;
    (0..lat.len())
        .map(|i| {
            lat.coords(i)
                .iter()
                .fold(0usize, |acc, &c| acc * lat.side() + c.rem_euclid(side) as usize)
        })
        .collect()
}

/// Same sum as [`direct_sum`] through an unnormalised inverse DFT along each axis.
fn transform_sum(lat: &TorusLattice, weights: &[Complex64]) -> Vec<Complex64> {
    let side = lat.side();
    let layout = fft_layout(lat);
    let mut grid = vec![Complex64::new(0.0, 0.0); lat.len()];
    for (i, &pos) in layout.iter().enumerate() {
        grid[pos] = weights[i];
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(side);
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    for axis in 0..lat.nu() {
        let stride = side.pow((lat.nu() - 1 - axis) as u32);
        let block = stride * side;
        for base in (0..grid.len()).step_by(block) {
            for inner in 0..stride {
                let start = base + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = grid[start + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    grid[start + j * stride] = *v;
                }
            }
        }
    }
    layout.iter().map(|&pos| grid[pos]).collect()
}

fn check_order(c: &Couplings, order: Order, skip_zero_mode: bool) -> Result<()> {
    if order == Order::Inverse && !c.is_gapped() && !skip_zero_mode {
        return Err(Error::SingularMode {
            context: "1/gamma(k) at k = 0 in the m = -1 kernel",
        });
    }
    Ok(())
}

/// `H^(m)(t, ·)` on every site.
pub fn compute_fourier_kernel(lat: &TorusLattice, c: &Couplings, order: Order, t: f64) -> Result<KernelField> {
    compute_fourier_kernel_with(lat, c, order, t, EvalPath::Transform)
}

pub fn compute_fourier_kernel_with(
    lat: &TorusLattice,
    c: &Couplings,
    order: Order,
    t: f64,
    path: EvalPath,
) -> Result<KernelField> {
    c.check_lattice(lat)?;
    check_order(c, order, false)?;
    let gamma = dispersion_table(lat, c);
    let sum = mode_sum(lat, &gamma, order, t, false, path);
    let values = sum
        .iter()
        .map(|s| match order {
            Order::Unit => Complex64::new(s.re, 0.0),
            _ => Complex64::new(s.im, 0.0),
        })
        .collect();
    Ok(KernelField {
        t,
        kind: order.kind(),
        values,
        couplings: c.clone(),
        shape: lat.shape(),
    })
}

/// `(1/|Λ|) Σ_k γ(k)^m e^{ik·x}` on every site; real because `γ` is even.
pub fn static_mode_sum(lat: &TorusLattice, c: &Couplings, order: Order) -> Result<Vec<f64>> {
    c.check_lattice(lat)?;
    check_order(c, order, false)?;
    let gamma = dispersion_table(lat, c);
    let sum = mode_sum(lat, &gamma, order, 0.0, false, EvalPath::Transform);
    Ok(sum.iter().map(|s| s.re).collect())
}

/// Single value `H^(m)(t, x)` by direct summation over the dual grid.
pub fn fourier_kernel_at(lat: &TorusLattice, c: &Couplings, order: Order, t: f64, site: usize) -> Result<f64> {
    c.check_lattice(lat)?;
    check_order(c, order, false)?;
    let x = lat.coords(site);
    let l = lat.half_side() as i64;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..lat.len() {
        let g = crate::torus::dispersion(c, &lat.dual_point(k));
        let w = match order {
            Order::Unit => 1.0,
            Order::Gamma => g,
            Order::Inverse => 1.0 / g,
        };
        let dot: i64 = lat.coords(k).iter().zip(x).map(|(a, b)| a * b).sum();
        let arg = PI * dot.rem_euclid(2 * l) as f64 / l as f64 - 2.0 * g * t;
        acc += Complex64::from_polar(w, arg);
    }
    acc /= lat.len() as f64;
    Ok(match order {
        Order::Unit => acc.re,
        _ => acc.im,
    })
}

/// Uniform bound `max_k γ(k)^m` on `|H^(m)(t, x)|`, the natural scale for
/// comparing evaluations of the same kernel.
pub fn kernel_scale(c: &Couplings, order: Order) -> f64 {
    match order {
        Order::Unit => 1.0,
        Order::Gamma => c.c_max(),
        Order::Inverse => 1.0 / c.omega(),
    }
}

/// Evolution kernels `(h1, h2)` at time `t`.
///
/// With `zero_omega` the `k = 0` mode is removed from the Fourier sums and
/// replaced by the free-particle terms `(1 - it)/|Λ|` and `it/|Λ|`, which is
/// the correct evolution for `omega = 0`.
pub fn compute_evolution_kernels(
    lat: &TorusLattice,
    c: &Couplings,
    t: f64,
    zero_omega: bool,
) -> Result<(KernelField, KernelField)> {
    compute_evolution_kernels_with(lat, c, t, zero_omega, EvalPath::Transform)
}

pub fn compute_evolution_kernels_with(
    lat: &TorusLattice,
    c: &Couplings,
    t: f64,
    zero_omega: bool,
    path: EvalPath,
) -> Result<(KernelField, KernelField)> {
    c.check_lattice(lat)?;
    if zero_omega && c.is_gapped() {
        return Err(invalid(
            "zero_omega",
            "zero-mode kernels only describe the omega = 0 dynamics",
        ));
    }
    check_order(c, Order::Inverse, zero_omega)?;
    let gamma = dispersion_table(lat, c);
    let s0 = mode_sum(lat, &gamma, Order::Unit, t, zero_omega, path);
    let s1 = mode_sum(lat, &gamma, Order::Gamma, t, zero_omega, path);
    let sm1 = mode_sum(lat, &gamma, Order::Inverse, t, zero_omega, path);
    let i_half = Complex64::new(0.0, 0.5);
    let mut h1: Vec<Complex64> = (0..lat.len())
        .map(|x| s0[x].re + i_half * (s1[x].im + sm1[x].im))
        .collect();
    let mut h2: Vec<Complex64> = (0..lat.len()).map(|x| i_half * (s1[x].im - sm1[x].im)).collect();
    let (kind1, kind2) = if zero_omega {
        let (z1, z2) = zero_mode_terms(lat, t);
        h1.iter_mut().for_each(|v| *v += z1);
        h2.iter_mut().for_each(|v| *v += z2);
        (KernelKind::ZeroEvo1, KernelKind::ZeroEvo2)
    } else {
        (KernelKind::Evo1, KernelKind::Evo2)
    };
    let field = |kind, values| KernelField {
        t,
        kind,
        values,
        couplings: c.clone(),
        shape: lat.shape(),
    };
    Ok((field(kind1, h1), field(kind2, h2)))
}

/// Contributions `((1 - it)/|Λ|, it/|Λ|)` of the free `k = 0` mode when `omega = 0`.
pub fn zero_mode_terms(lat: &TorusLattice, t: f64) -> (Complex64, Complex64) {
    let n = lat.len() as f64;
    (Complex64::new(1.0, -t) / n, Complex64::new(0.0, t) / n)
}

/// `v_h(mu) = c max(2/mu, e^{mu/2 + 1})`.
pub fn harmonic_velocity(c: &Couplings, mu: f64) -> f64 {
    c.c_max() * (2.0 / mu).max((0.5 * mu + 1.0).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeParams {
    mu: f64,
    couplings: Couplings,
}

impl EnvelopeParams {
    pub fn new(mu: f64, couplings: Couplings) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid("mu", format!("decay rate must be > 0, got {mu}")));
        }
        Ok(Self { mu, couplings })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }
}

/// Exponential envelope dominating `|H^(m)(t, x)|` for `|x| = r`.
pub fn envelope(e: &EnvelopeParams, order: Order, t: f64, r: usize) -> f64 {
    let c = e.couplings.c_max();
    let mu = e.mu;
    let prefactor = match order {
        Order::Unit => 1.0,
        Order::Gamma => c * (0.5 * mu).exp(),
        Order::Inverse => 1.0 / c,
    };
    let v = harmonic_velocity(&e.couplings, mu);
    prefactor * (-mu * (r as f64 - v * t.abs())).exp()
}

/// Small-time majorant `(2c|t|)^{2|x|} / (2|x|)! · e^{2c|t|}` of `|H0(t, x)|`.
pub fn small_time_majorant(c: &Couplings, t: f64, r: usize) -> f64 {
    let a = 2.0 * c.c_max() * t.abs();
    let n = 2 * r;
    // accumulate a^n / n! in log space to survive large r
    let log_term: f64 = (1..=n).map(|j| (a / j as f64).ln()).sum();
    if n == 0 {
        return a.exp();
    }
    if a == 0.0 {
        return 0.0;
    }
    (log_term + a).exp()
}
