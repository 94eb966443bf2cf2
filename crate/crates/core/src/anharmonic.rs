//! Commutator bounds for the harmonic lattice perturbed by on-site potentials.
//!
//! Fourier convention: `V̂'(w) = (2π)^{-1} ∫ V'(q) e^{-iqw} dq`, and the
//! perturbation strength is `κ_V = ∫ |w| |V̂'(w)| dw`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::kernels::harmonic_velocity;
use crate::quad::{integrate_line, Integral};
use crate::sums::{power_sum_torus, power_sum_zd};
use crate::torus::{Couplings, SiteMetric, TorusLattice};
use crate::weyl::{set_distance, WeylFunction};

const KAPPA_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialProfile {
    Zero,
    /// `V(q) = alpha e^{-q²/2}`
    Gaussian {
        alpha: f64,
    },
    /// `V(q) = amplitude cos(beta q)`
    Cosine {
        amplitude: f64,
        beta: f64,
    },
    /// `|V̂'(w)|` sampled at increasing `w`, linear in between and zero outside
    Tabulated {
        w: Vec<f64>,
        abs_vhat: Vec<f64>,
    },
}

/// Whether the potential acts on single sites or on nearest-neighbour differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Placement {
    #[default]
    Site,
    Bond,
}

/// Whether the potential is a function of `q` or of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variable {
    #[default]
    Position,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub profile: PotentialProfile,
    pub placement: Placement,
    pub variable: Variable,
}

impl PerturbationSpec {
    pub fn new(profile: PotentialProfile) -> Result<Self> {
        match &profile {
            PotentialProfile::Zero => {}
            PotentialProfile::Gaussian { alpha } => finite("alpha", *alpha)?,
            PotentialProfile::Cosine { amplitude, beta } => {
                finite("amplitude", *amplitude)?;
                finite("beta", *beta)?;
            }
            PotentialProfile::Tabulated { w, abs_vhat } => {
                if w.len() != abs_vhat.len() || w.len() < 2 {
                    return Err(invalid("table", "need at least two matching (w, |V'^(w)|) samples"));
                }
                if w.windows(2).any(|p| p[1] <= p[0]) {
                    return Err(invalid("table", "w must be strictly increasing"));
                }
                if abs_vhat.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(invalid("table", "|V'^(w)| must be finite and >= 0"));
                }
            }
        }
        Ok(Self {
            profile,
            placement: Placement::Site,
            variable: Variable::Position,
        })
    }

    pub fn zero() -> Self {
        Self {
            profile: PotentialProfile::Zero,
            placement: Placement::Site,
            variable: Variable::Position,
        }
    }

    pub fn gaussian(alpha: f64) -> Result<Self> {
        Self::new(PotentialProfile::Gaussian { alpha })
    }

    pub fn cosine(amplitude: f64, beta: f64) -> Result<Self> {
        Self::new(PotentialProfile::Cosine { amplitude, beta })
    }

    pub fn placed(mut self, placement: Placement, variable: Variable) -> Self {
        self.placement = placement;
        self.variable = variable;
        self
    }

    pub fn is_zero(&self) -> bool {
        match &self.profile {
            PotentialProfile::Zero => true,
            PotentialProfile::Gaussian { alpha } => *alpha == 0.0,
            PotentialProfile::Cosine { amplitude, beta } => *amplitude == 0.0 || *beta == 0.0,
            PotentialProfile::Tabulated { abs_vhat, .. } => abs_vhat.iter().all(|v| *v == 0.0),
        }
    }

    /// `V(s)`, when the profile defines the potential itself.
    pub fn potential(&self, s: f64) -> Option<f64> {
        match &self.profile {
            PotentialProfile::Zero => Some(0.0),
            PotentialProfile::Gaussian { alpha } => Some(alpha * (-0.5 * s * s).exp()),
            PotentialProfile::Cosine { amplitude, beta } => Some(amplitude * (beta * s).cos()),
            PotentialProfile::Tabulated { .. } => None,
        }
    }

    /// `|V̂'(w)|` for profiles with an integrable transform.
    pub fn abs_vprime_hat(&self, w: f64) -> Option<f64> {
        match &self.profile {
            PotentialProfile::Zero => Some(0.0),
            PotentialProfile::Gaussian { alpha } => {
                Some(alpha.abs() * w.abs() * (-0.5 * w * w).exp() / (2.0 * PI).sqrt())
            }
            // V' has two point masses at ±beta: not a function
            PotentialProfile::Cosine { .. } => None,
            PotentialProfile::Tabulated { w: ws, abs_vhat } => {
                if w < ws[0] || w > ws[ws.len() - 1] {
                    return Some(0.0);
                }
                let i = ws.partition_point(|x| *x <= w).clamp(1, ws.len() - 1);
                let s = (w - ws[i - 1]) / (ws[i] - ws[i - 1]);
                Some(abs_vhat[i - 1] + s * (abs_vhat[i] - abs_vhat[i - 1]))
            }
        }
    }

    /// `‖V̂'‖_1`. For the cosine the transform is a pair of point masses of
    /// weight `|amplitude| beta / 2`.
    pub fn l1_norm(&self) -> Result<Integral> {
        match &self.profile {
            PotentialProfile::Cosine { amplitude, beta } => Ok(exact(amplitude.abs() * beta.abs())),
            PotentialProfile::Zero => Ok(exact(0.0)),
            _ => integrate_line(|w| self.abs_vprime_hat(w).unwrap_or(0.0), KAPPA_REL_TOL),
        }
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite, got {v}")))
    }
}

fn exact(value: f64) -> Integral {
    Integral {
        value,
        error_estimate: 0.0,
        evaluations: 0,
    }
}

/// `κ_V = ∫ |w| |V̂'(w)| dw`, with an error estimate.
pub fn kappa_v(p: &PerturbationSpec) -> Result<Integral> {
    match &p.profile {
        PotentialProfile::Zero => Ok(exact(0.0)),
        PotentialProfile::Cosine { amplitude, beta } => Ok(exact(amplitude.abs() * beta * beta)),
        _ => kappa_of(|w| p.abs_vprime_hat(w).unwrap_or(0.0)),
    }
}

/// `∫ |w| h(w) dw` for a user-supplied `h = |V̂'|`; non-integrable tails are an error.
pub fn kappa_of<F: Fn(f64) -> f64>(abs_vhat: F) -> Result<Integral> {
    integrate_line(|w| w.abs() * abs_vhat(w).abs(), KAPPA_REL_TOL)
}

/// Domain of the lattice sum in `C_ν`.
#[derive(Debug, Clone, PartialEq)]
pub enum CnuDomain {
    Torus(TorusLattice),
    /// infinite-lattice limit
    Zd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnharmonicBoundParams {
    mu: f64,
    epsilon: f64,
    couplings: Couplings,
    domain: CnuDomain,
}

impl AnharmonicBoundParams {
    pub fn new(mu: f64, epsilon: f64, couplings: Couplings, domain: CnuDomain) -> Result<Self> {
        if !(mu.is_finite() && mu >= 1.0) {
            return Err(invalid(
                "mu",
                format!("the anharmonic bound requires mu >= 1, got {mu}"),
            ));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be > 0, got {epsilon}")));
        }
        if let CnuDomain::Torus(lat) = &domain {
            if lat.nu() != couplings.nu() {
                return Err(Error::LatticeMismatch(format!(
                    "couplings for nu = {}, lattice has nu = {}",
                    couplings.nu(),
                    lat.nu()
                )));
            }
        }
        Ok(Self {
            mu,
            epsilon,
            couplings,
            domain,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    pub fn nu(&self) -> usize {
        self.couplings.nu()
    }

    pub fn domain(&self) -> &CnuDomain {
        &self.domain
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnharmonicConstants {
    /// maximiser of `(1+s)^{nu+1} e^{-eps s}` on `s >= 0`
    pub s_star: f64,
    pub sup_factor: f64,
    pub c: f64,
    pub c_nu: f64,
    pub v_harmonic: f64,
    /// `v(mu + eps)`
    pub v: f64,
}

pub fn anharm_constants(b: &AnharmonicBoundParams, kappa: f64) -> Result<AnharmonicConstants> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(invalid("kappa", format!("must be finite and >= 0, got {kappa}")));
    }
    let nu = b.nu();
    let p = (nu + 1) as f64;
    let me = b.mu + b.epsilon;
    let s_star = (p / b.epsilon - 1.0).max(0.0);
    let sup_factor = (1.0 + s_star).powf(p) * (-b.epsilon * s_star).exp();
    let cc = b.couplings.c_max();
    let c = (2.0 + cc * (0.5 * me).exp() + 1.0 / cc) * sup_factor;
    let sum = match &b.domain {
        CnuDomain::Torus(lat) => power_sum_torus(lat),
        CnuDomain::Zd => power_sum_zd(nu),
    };
    let c_nu = 2f64.powi(nu as i32 + 1) * sum;
    let v_harmonic = harmonic_velocity(&b.couplings, me);
    Ok(AnharmonicConstants {
        s_star,
        sup_factor,
        c,
        c_nu,
        v_harmonic,
        v: v_harmonic + c * c_nu * kappa / me,
    })
}

/// `F_mu(r) = e^{-mu r} (1 + r)^{-nu-1}`
pub fn f_mu(mu: f64, nu: usize, r: f64) -> f64 {
    (-mu * r).exp() * (1.0 + r).powi(-(nu as i32 + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnharmonicForm {
    Theorem,
    Corollary,
}

pub fn anharm_bound_rhs<M: SiteMetric>(
    metric: &M,
    f: &WeylFunction,
    g: &WeylFunction,
    t: f64,
    b: &AnharmonicBoundParams,
    kappa: f64,
    form: AnharmonicForm,
) -> Result<f64> {
    if f.site_count() != metric.site_count() || g.site_count() != metric.site_count() {
        return Err(Error::LatticeMismatch(
            "functions and metric disagree on the number of sites".into(),
        ));
    }
    let k = anharm_constants(b, kappa)?;
    let nu = b.nu();
    let (xs, ys) = (f.support(), g.support());
    let norms = f.sup_norm() * g.sup_norm();
    let me = b.mu + b.epsilon;
    let Some(dxy) = set_distance(metric, xs, ys) else {
        return Ok(0.0);
    };
    match form {
        AnharmonicForm::Theorem => {
            let sum: f64 = xs
                .iter()
                .flat_map(|&x| ys.iter().map(move |&y| metric.distance(x, y)))
                .map(|d| f_mu(b.mu, nu, d as f64))
                .sum();
            Ok(k.c * norms * (me * k.v * t.abs()).exp() * sum)
        }
        AnharmonicForm::Corollary => {
            let c_tilde = k.c * power_sum_zd(nu);
            let m = xs.len().min(ys.len()) as f64;
            let rate = (1.0 + b.epsilon / b.mu) * k.v * t.abs();
            Ok(c_tilde * norms * m * (-b.mu * (dxy as f64 - rate)).exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn gaussian_kappa_is_alpha() {
        for alpha in [0.1, 0.5, 1.0, 3.0] {
            let k = kappa_v(&PerturbationSpec::gaussian(alpha).unwrap()).unwrap();
            assert!((k.value - alpha).abs() < 1e-8 * alpha, "{}", k.value);
            assert!(k.error_estimate < 1e-8 * alpha);
        }
        let k2 = kappa_v(&PerturbationSpec::gaussian(-2.0).unwrap()).unwrap();
        let k1 = kappa_v(&PerturbationSpec::gaussian(1.0).unwrap()).unwrap();
        assert!((k2.value - 2.0 * k1.value).abs() < 1e-12);
        assert_eq!(kappa_v(&PerturbationSpec::zero()).unwrap().value, 0.0);
    }

    #[test]
    fn gaussian_l1_norm() {
        // ∫ |w| e^{-w²/2} dw / sqrt(2π) = 2 / sqrt(2π)
        let n = PerturbationSpec::gaussian(1.0).unwrap().l1_norm().unwrap();
        assert!((n.value - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn cosine_and_table() {
        let p = PerturbationSpec::cosine(0.5, 2.0).unwrap();
        assert_eq!(kappa_v(&p).unwrap().value, 2.0);
        assert_eq!(p.l1_norm().unwrap().value, 1.0);
        let tab = PerturbationSpec::new(PotentialProfile::Tabulated {
            w: vec![-1.0, 0.0, 1.0],
            abs_vhat: vec![0.0, 1.0, 0.0],
        })
        .unwrap();
        // ∫ |w| (1 - |w|) over [-1, 1] = 1/3
        assert!((kappa_v(&tab).unwrap().value - 1.0 / 3.0).abs() < 1e-10);
        assert!(PerturbationSpec::new(PotentialProfile::Tabulated {
            w: vec![0.0, 0.0],
            abs_vhat: vec![1.0, 1.0],
        })
        .is_err());
    }

    #[test]
    fn divergent_kappa() {
        assert!(matches!(
            kappa_of(|w| 1.0 / (1.0 + w * w)),
            Err(Error::Divergence { .. })
        ));
    }

    fn params(mu: f64, eps: f64) -> AnharmonicBoundParams {
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        AnharmonicBoundParams::new(mu, eps, c, CnuDomain::Zd).unwrap()
    }

    #[test]
    fn constants() {
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        assert!(AnharmonicBoundParams::new(0.9, 1.0, c.clone(), CnuDomain::Zd).is_err());
        assert!(AnharmonicBoundParams::new(1.0, 0.0, c, CnuDomain::Zd).is_err());
        let b = params(1.0, 0.5);
        let k0 = anharm_constants(&b, 0.0).unwrap();
        assert_eq!(k0.v, harmonic_velocity(b.couplings(), 1.5));
        assert!((k0.c_nu - 4.0 * (PI * PI / 3.0 - 1.0)).abs() < 1e-12);
        assert_eq!(k0.s_star, 3.0);
        assert!((k0.sup_factor - 16.0 * (-1.5f64).exp()).abs() < 1e-14);
        let k1 = anharm_constants(&b, 0.3).unwrap();
        assert!(k1.v > k0.v);
        let flat = anharm_constants(&params(1.0, 2.5), 0.0).unwrap();
        assert_eq!(flat.s_star, 0.0);
        assert_eq!(flat.sup_factor, 1.0);
    }

    #[test]
    fn torus_cnu_below_limit() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let c = Couplings::isotropic(1.0, 1.0, 1).unwrap();
        let b = AnharmonicBoundParams::new(1.0, 1.0, c, CnuDomain::Torus(lat)).unwrap();
        let k = anharm_constants(&b, 0.0).unwrap();
        assert!(k.c_nu < anharm_constants(&params(1.0, 1.0), 0.0).unwrap().c_nu);
    }

    #[test]
    fn bound_values() {
        let lat = TorusLattice::new(1, 8).unwrap();
        let b = params(1.0, 1.0);
        let one = Complex64::new(1.0, 0.0);
        let f = WeylFunction::delta(16, lat.origin(), one).unwrap();
        let g = WeylFunction::delta(16, lat.axis_site(4), one).unwrap();
        let k = anharm_constants(&b, 0.2).unwrap();
        let th = anharm_bound_rhs(&lat, &f, &g, 0.0, &b, 0.2, AnharmonicForm::Theorem).unwrap();
        assert!((th - k.c * f_mu(1.0, 1, 4.0)).abs() < 1e-15);
        let mut last = th;
        for t in [0.1, 0.2, 0.4] {
            let v = anharm_bound_rhs(&lat, &f, &g, t, &b, 0.2, AnharmonicForm::Theorem).unwrap();
            assert!(v > last);
            last = v;
        }
        let cor = anharm_bound_rhs(&lat, &f, &g, 0.0, &b, 0.2, AnharmonicForm::Corollary).unwrap();
        assert!((cor - k.c * (PI * PI / 3.0 - 1.0) * (-4.0f64).exp()).abs() < 1e-14);
    }
}
