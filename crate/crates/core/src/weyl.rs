//! Weyl functions, their harmonic evolution and the harmonic commutator bounds.
//!
//! A Weyl function `f` stands for `W(f) = exp(i Σ_x (q_x Re f_x + p_x Im f_x))`.
//! Inner products conjugate the first argument, `⟨f, g⟩ = Σ_x conj(f_x) g_x`,
//! so that `W(f) W(g) = W(f + g) exp(-(i/2) Im⟨f, g⟩)`.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::kernels::{compute_evolution_kernels, harmonic_velocity, KernelField, KernelKind};
use crate::quad::{integrate_line, Integral};
use crate::sums::exp_sum_zd;
use crate::torus::{dispersion_table, Couplings, SiteMetric, TorusLattice};

#[derive(Debug, Clone, PartialEq)]
pub struct WeylFunction {
    values: Vec<Complex64>,
    support: Vec<usize>,
}

impl WeylFunction {
    /// Function on `n_sites` sites with the given `(site, amplitude)` entries.
    ///
    /// Every listed site belongs to the support, even with amplitude zero.
    pub fn new(n_sites: usize, entries: &[(usize, Complex64)]) -> Result<Self> {
        let mut values = vec![Complex64::new(0.0, 0.0); n_sites];
        let mut support = Vec::with_capacity(entries.len());
        for &(x, v) in entries {
            if x >= n_sites {
                return Err(invalid("support", format!("site {x} not in 0..{n_sites}")));
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(invalid("values", format!("amplitude at {x} is not finite")));
            }
            if support.contains(&x) {
                return Err(invalid("support", format!("site {x} listed twice")));
            }
            values[x] = v;
            support.push(x);
        }
        support.sort_unstable();
        Ok(Self { values, support })
    }

    pub fn delta(n_sites: usize, site: usize, amplitude: Complex64) -> Result<Self> {
        Self::new(n_sites, &[(site, amplitude)])
    }

    /// Function supported on the whole site set.
    pub fn full(values: Vec<Complex64>) -> Self {
        let support = (0..values.len()).collect();
        Self { values, support }
    }

    pub fn zero(n_sites: usize) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); n_sites],
            support: Vec::new(),
        }
    }

    pub fn site_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, x: usize) -> Complex64 {
        self.values[x]
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `‖f‖_∞`
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            support: self.support.clone(),
        }
    }

    /// Sum of two functions; the support is the union.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        same_size(self, other)?;
        let mut support: Vec<usize> = self.support.iter().chain(&other.support).copied().collect();
        support.sort_unstable();
        support.dedup();
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            support,
        })
    }
}

fn same_size(f: &WeylFunction, g: &WeylFunction) -> Result<()> {
    if f.site_count() != g.site_count() {
        return Err(Error::LatticeMismatch(format!(
            "functions live on {} and {} sites",
            f.site_count(),
            g.site_count()
        )));
    }
    Ok(())
}

/// `f_t = f * conj(h1) + conj(f) * h2` with periodic convolution.
///
/// The result is supported on the whole lattice. At `t = 0` the input values
/// are returned unchanged.
pub fn evolve(lat: &TorusLattice, f: &WeylFunction, h1: &KernelField, h2: &KernelField) -> Result<WeylFunction> {
    if f.site_count() != lat.len() {
        return Err(Error::LatticeMismatch(format!(
            "function has {} sites, lattice has {}",
            f.site_count(),
            lat.len()
        )));
    }
    if h1.shape() != lat.shape() || h2.shape() != lat.shape() {
        return Err(Error::LatticeMismatch("kernels computed on another lattice".into()));
    }
    if h1.time() != h2.time() || h1.couplings() != h2.couplings() {
        return Err(Error::LatticeMismatch("kernels from different runs".into()));
    }
    let paired = matches!(
        (h1.kind(), h2.kind()),
        (KernelKind::Evo1, KernelKind::Evo2) | (KernelKind::ZeroEvo1, KernelKind::ZeroEvo2)
    );
    if !paired {
        return Err(invalid("kernels", "expected an (h1, h2) evolution pair"));
    }
    if h1.time() == 0.0 {
        return Ok(WeylFunction::full(f.values.clone()));
    }
    let n = lat.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for &y in &f.support {
        let fy = f.values[y];
        if fy == Complex64::new(0.0, 0.0) {
            continue;
        }
        let fyc = fy.conj();
        for (x, o) in out.iter_mut().enumerate() {
            let z = lat.sub(x, y);
            *o += fy * h1.value(z).conj() + fyc * h2.value(z);
        }
    }
    Ok(WeylFunction::full(out))
}

/// `Im⟨f, g⟩`.
pub fn symplectic_form(f: &WeylFunction, g: &WeylFunction) -> Result<f64> {
    same_size(f, g)?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a.re * b.im - a.im * b.re)
        .sum())
}

/// `‖[W(f_t), W(g)]‖ = 2|sin(σ/2)|` with `σ = Im⟨g, f_t⟩`, given the evolved `f_t`.
pub fn commutator_norm(f_t: &WeylFunction, g: &WeylFunction) -> Result<f64> {
    Ok(norm_from_phase(symplectic_form(g, f_t)?))
}

pub fn norm_from_phase(sigma: f64) -> f64 {
    2.0 * (0.5 * sigma).sin().abs()
}

/// Linear estimate `|Im⟨g, f_t⟩|`, an upper bound of [`commutator_norm`].
pub fn commutator_linear_bound(f_t: &WeylFunction, g: &WeylFunction) -> Result<f64> {
    Ok(symplectic_form(g, f_t)?.abs())
}

/// Exact harmonic commutator norm `‖[τ_t(W(f)), W(g)]‖` on the torus.
pub fn commutator_norm_exact(
    lat: &TorusLattice,
    c: &Couplings,
    f: &WeylFunction,
    g: &WeylFunction,
    t: f64,
) -> Result<f64> {
    let (h1, h2) = compute_evolution_kernels(lat, c, t, !c.is_gapped())?;
    commutator_norm(&evolve(lat, f, &h1, &h2)?, g)
}

/// Absolute accuracy of a double-precision `Im⟨g, f_t⟩`.
///
/// Kernel values carry roundoff of order `eps` times the largest Fourier
/// weight `max(1, c, 1/γ_min)`, which the convolution and the pairing
/// amplify by at most `‖f‖_1 ‖g‖_1`.
pub fn phase_resolution(lat: &TorusLattice, c: &Couplings, f: &WeylFunction, g: &WeylFunction, t: f64) -> f64 {
    let gamma_min = dispersion_table(lat, c)
        .into_iter()
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let scale = 1.0 + c.c_max() + 1.0 / gamma_min + t.abs() / lat.len() as f64;
    64.0 * f64::EPSILON * f.l1_norm() * g.l1_norm() * scale
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicForm {
    Theorem,
    Corollary,
    SmallTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBoundParams {
    mu: f64,
    a: Option<f64>,
    couplings: Couplings,
}

impl HarmonicBoundParams {
    pub fn new(mu: f64, couplings: Couplings) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(invalid("mu", format!("must be > 0, got {mu}")));
        }
        Ok(Self { mu, a: None, couplings })
    }

    pub fn with_a(mut self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid("a", format!("must lie in (0, 1), got {a}")));
        }
        self.a = Some(a);
        Ok(self)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a(&self) -> Option<f64> {
        self.a
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    /// `C = 2 + c e^{mu/2} + 1/c`
    pub fn constant(&self) -> f64 {
        let c = self.couplings.c_max();
        2.0 + c * (0.5 * self.mu).exp() + 1.0 / c
    }

    /// `C Σ_{z ∈ Z^nu} e^{-mu (1-a) |z|}`
    pub fn corollary_constant(&self) -> Result<f64> {
        let a = self
            .a
            .ok_or_else(|| invalid("a", "the corollary form needs a in (0, 1)"))?;
        Ok(self.constant() * exp_sum_zd(self.mu * (1.0 - a), self.couplings.nu()))
    }

    pub fn velocity(&self) -> f64 {
        harmonic_velocity(&self.couplings, self.mu)
    }

    /// Separation `1 + c e^{mu/2 + 1}` that `d(X, Y)` must exceed for the small-time form.
    pub fn small_time_separation(&self) -> f64 {
        1.0 + self.couplings.c_max() * (0.5 * self.mu + 1.0).exp()
    }
}

/// `min_{x ∈ X, y ∈ Y} d(x, y)`, or `None` if either set is empty.
pub fn set_distance<M: SiteMetric>(metric: &M, xs: &[usize], ys: &[usize]) -> Option<usize> {
    xs.iter()
        .flat_map(|&x| ys.iter().map(move |&y| metric.distance(x, y)))
        .min()
}

/// Right-hand side of the harmonic commutator bound.
pub fn harmonic_bound_rhs<M: SiteMetric>(
    metric: &M,
    f: &WeylFunction,
    g: &WeylFunction,
    t: f64,
    p: &HarmonicBoundParams,
    form: HarmonicForm,
) -> Result<f64> {
    if f.site_count() != metric.site_count() || g.site_count() != metric.site_count() {
        return Err(Error::LatticeMismatch(
            "functions and metric disagree on the number of sites".into(),
        ));
    }
    let (xs, ys) = (f.support(), g.support());
    let norms = f.sup_norm() * g.sup_norm();
    let mu = p.mu;
    let vt = p.velocity() * t.abs();
    let Some(dxy) = set_distance(metric, xs, ys) else {
        return Ok(0.0);
    };
    let theorem = || {
        let sum: f64 = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| metric.distance(x, y)))
            .map(|d| (-mu * (d as f64 - vt)).exp())
            .sum();
        p.constant() * norms * sum
    };
    match form {
        HarmonicForm::Theorem => Ok(theorem()),
        HarmonicForm::Corollary => {
            let a =
                p.a.ok_or_else(|| invalid("a", "the corollary form needs a in (0, 1)"))?;
            let m = xs.len().min(ys.len()) as f64;
            Ok(p.corollary_constant()? * norms * m * (-mu * (a * dxy as f64 - vt)).exp())
        }
        HarmonicForm::SmallTime => {
            let need = p.small_time_separation();
            if dxy as f64 <= need {
                return Err(Error::Precondition(format!(
                    "small-time form needs d(X,Y) > {need:.6}, got {dxy}"
                )));
            }
            if t == 0.0 {
                return Ok(0.0);
            }
            Ok(t.abs().powi(2 * dxy as i32) * theorem())
        }
    }
}

/// `bound · wA · wB`, the commutator bound for observables `Â`, `B̂` smeared over
/// Weyl operators with weights `w = ∫|s Â(s)| ds`.
pub fn observable_transfer(bound: f64, wa: f64, wb: f64) -> Result<f64> {
    for (name, v) in [("bound", bound), ("wA", wa), ("wB", wb)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
        }
    }
    Ok(bound * wa * wb)
}

/// `∫ |s a(s)| ds` over the real line.
pub fn transfer_weight<F: Fn(f64) -> f64>(a: F) -> Result<Integral> {
    integrate_line(|s| (s * a(s)).abs(), 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{compute_fourier_kernel, Order};
    use std::f64::consts::PI;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn construction_invariants() {
        let f = WeylFunction::new(5, &[(3, c64(1.0, 0.0)), (1, c64(0.0, 0.0))]).unwrap();
        assert_eq!(f.support(), &[1, 3]);
        assert!(f
            .values()
            .iter()
            .enumerate()
            .all(|(x, v)| f.support().contains(&x) || v.norm() == 0.0));
        assert!(WeylFunction::new(5, &[(5, c64(1.0, 0.0))]).is_err());
        assert!(WeylFunction::new(5, &[(2, c64(1.0, 0.0)), (2, c64(1.0, 0.0))]).is_err());
        assert!(WeylFunction::new(5, &[(2, c64(f64::NAN, 0.0))]).is_err());
    }

    #[test]
    fn symplectic_examples() {
        let f = WeylFunction::delta(4, 0, c64(0.0, 1.0)).unwrap();
        let g = WeylFunction::delta(4, 0, c64(1.0, 0.0)).unwrap();
        assert_eq!(symplectic_form(&g, &f).unwrap(), 1.0);
        assert_eq!(symplectic_form(&f, &g).unwrap(), -1.0);
        assert_eq!(symplectic_form(&f, &f).unwrap(), 0.0);
        assert!(symplectic_form(&f, &WeylFunction::zero(3)).is_err());
    }

    #[test]
    fn norm_from_phase_examples() {
        assert!((norm_from_phase(1.0) - 0.958_851_077_208_406).abs() < 1e-15);
        assert!(norm_from_phase(2.0 * PI) < 1e-15);
    }

    #[test]
    fn evolution_at_zero_is_identity() {
        let lat = TorusLattice::new(1, 6).unwrap();
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let f = WeylFunction::new(12, &[(2, c64(0.3, -1.2)), (7, c64(2.0, 0.5))]).unwrap();
        let (h1, h2) = compute_evolution_kernels(&lat, &c, 0.0, false).unwrap();
        assert_eq!(evolve(&lat, &f, &h1, &h2).unwrap().values(), f.values());
    }

    #[test]
    fn evolve_rejects_mismatch() {
        let lat = TorusLattice::new(1, 6).unwrap();
        let other = TorusLattice::new(1, 5).unwrap();
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let f = WeylFunction::delta(12, 0, c64(1.0, 0.0)).unwrap();
        let (h1, h2) = compute_evolution_kernels(&other, &c, 0.5, false).unwrap();
        assert!(matches!(evolve(&lat, &f, &h1, &h2), Err(Error::LatticeMismatch(_))));
        let (h1, _) = compute_evolution_kernels(&lat, &c, 0.5, false).unwrap();
        let (_, h2b) = compute_evolution_kernels(&lat, &c, 0.6, false).unwrap();
        assert!(evolve(&lat, &f, &h1, &h2b).is_err());
        let g = WeylFunction::delta(10, 0, c64(1.0, 0.0)).unwrap();
        assert!(evolve(&lat, &g, &h1, &h1).is_err());
    }

    #[test]
    fn theorem_single_pair() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let f = WeylFunction::delta(16, lat.origin(), c64(1.0, 0.0)).unwrap();
        let g = WeylFunction::delta(16, lat.axis_site(5), c64(0.0, 1.0)).unwrap();
        let p = HarmonicBoundParams::new(1.0, c).unwrap();
        let v = harmonic_bound_rhs(&lat, &f, &g, 0.0, &p, HarmonicForm::Theorem).unwrap();
        let s5 = 5f64.sqrt();
        let want = (2.0 + s5 * 0.5f64.exp() + 1.0 / s5) * (-5.0f64).exp();
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn small_time_form() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let c = Couplings::isotropic(0.05, 0.001875, 1).unwrap();
        let p = HarmonicBoundParams::new(1.0, c).unwrap();
        let f = WeylFunction::delta(16, lat.origin(), c64(1.0, 0.0)).unwrap();
        let g = WeylFunction::delta(16, lat.axis_site(3), c64(1.0, 0.0)).unwrap();
        assert_eq!(
            harmonic_bound_rhs(&lat, &f, &g, 0.0, &p, HarmonicForm::SmallTime).unwrap(),
            0.0
        );
        let near = WeylFunction::delta(16, lat.axis_site(1), c64(1.0, 0.0)).unwrap();
        assert!(matches!(
            harmonic_bound_rhs(&lat, &f, &near, 0.1, &p, HarmonicForm::SmallTime),
            Err(Error::Precondition(_))
        ));
        let th = harmonic_bound_rhs(&lat, &f, &g, 0.5, &p, HarmonicForm::Theorem).unwrap();
        let st = harmonic_bound_rhs(&lat, &f, &g, 0.5, &p, HarmonicForm::SmallTime).unwrap();
        assert!((st - 0.5f64.powi(6) * th).abs() < 1e-15 * th);
    }

    #[test]
    fn corollary_form() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let f = WeylFunction::delta(16, lat.origin(), c64(1.0, 0.0)).unwrap();
        let g = WeylFunction::delta(16, lat.axis_site(4), c64(1.0, 0.0)).unwrap();
        let p = HarmonicBoundParams::new(1.0, c.clone()).unwrap();
        assert!(harmonic_bound_rhs(&lat, &f, &g, 0.0, &p, HarmonicForm::Corollary).is_err());
        assert!(p.clone().with_a(1.0).is_err());
        let p = p.with_a(0.5).unwrap();
        let v = harmonic_bound_rhs(&lat, &f, &g, 0.0, &p, HarmonicForm::Corollary).unwrap();
        let coth = 1.0 / 0.25f64.tanh();
        assert!((v - p.constant() * coth * (-2.0f64).exp()).abs() < 1e-14);
        // corollary dominates the theorem form for singletons
        let th = harmonic_bound_rhs(&lat, &f, &g, 0.0, &p, HarmonicForm::Theorem).unwrap();
        assert!(v >= th);
    }

    // Taylor coefficient of e^{ik d} in (γ^2)^d for nu = 1 is λ^d, so
    // H1(t, d) = ±(2t)^{2d-1} λ^d / (2d-1)! + O(t^{2d+1}).
    #[test]
    fn small_time_form_leading_order_for_momentum_pairs() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let (omega, lambda) = (0.05, 0.001875);
        let c = Couplings::isotropic(omega, lambda, 1).unwrap();
        let d = 2;
        let t = 0.01;
        let h1 = compute_fourier_kernel(&lat, &c, Order::Gamma, t).unwrap();
        let lead = (2.0 * t).powi(2 * d - 1) * lambda.powi(d) / 6.0;
        let got = h1.value(lat.axis_site(d as usize)).re.abs();
        assert!((got / lead - 1.0).abs() < 1e-3, "{got} vs {lead}");

        // momentum-type pair: σ = -H1(t, d), so the commutator is of order t^{2d-1}
        // while the small-time form scales as t^{2d}
        let p = HarmonicBoundParams::new(1.0, c).unwrap();
        assert!(d as f64 > p.small_time_separation());
        let crossover = lead / t.powi(2 * d - 1) / (p.constant() * (-(d as f64)).exp());
        let tiny = 1e-3 * crossover;
        let exact_leading = lead / t.powi(2 * d - 1) * tiny.powi(2 * d - 1);
        let small_time = tiny.powi(2 * d) * p.constant() * (-(d as f64 - p.velocity() * tiny)).exp();
        assert!(exact_leading > small_time);
        assert!(exact_leading < 1e-20);
    }

    #[test]
    fn transfer() {
        assert_eq!(observable_transfer(0.3, 1.0, 1.0).unwrap(), 0.3);
        assert_eq!(observable_transfer(0.3, 0.0, 2.0).unwrap(), 0.0);
        assert!(observable_transfer(0.3, -1.0, 1.0).is_err());
        let w = transfer_weight(|s| (-0.5 * s * s).exp() / (2.0 * PI).sqrt()).unwrap();
        assert!((w.value - (2.0 / PI).sqrt()).abs() < 1e-10);
    }
}
