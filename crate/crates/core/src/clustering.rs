//! Ground-state Weyl correlations of the gapped harmonic lattice and their
//! comparison with the exponential clustering length.
//!
//! The ground state is Gaussian with `⟨q_x q_y⟩ = (1/2|Λ|) Σ_k e^{ik(x-y)}/γ(k)`,
//! `⟨p_x p_y⟩ = (1/2|Λ|) Σ_k γ(k) e^{ik(x-y)}` and vanishing symmetrised `qp`
//! terms, so `⟨W(h)⟩ = exp(-⟨B(h)²⟩/2)` with `B(h) = Σ Re h_x q_x + Im h_x p_x`.

use num_complex::Complex64;

use crate::anharmonic::{anharm_constants, kappa_v, AnharmonicBoundParams, CnuDomain, PerturbationSpec};
use crate::error::{invalid, Error, Result};
use crate::kernels::{static_mode_sum, Order};
use crate::lightcone::least_squares;
use crate::torus::{Couplings, TorusLattice};
use crate::weyl::{symplectic_form, WeylFunction};

/// Fits only use correlations this many times above the roundoff floor.
pub const FIT_FLOOR_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateCovariance {
    lattice: TorusLattice,
    couplings: Couplings,
    qq: Vec<f64>,
    pp: Vec<f64>,
    gap: f64,
}

pub fn ground_covariance(lat: &TorusLattice, c: &Couplings) -> Result<GroundStateCovariance> {
    if !c.is_gapped() {
        return Err(Error::SingularMode {
            context: "1/gamma(k) at k = 0 in the ground-state qq covariance",
        });
    }
    let half = |v: Vec<f64>| v.into_iter().map(|x| 0.5 * x).collect::<Vec<_>>();
    Ok(GroundStateCovariance {
        lattice: lat.clone(),
        couplings: c.clone(),
        qq: half(static_mode_sum(lat, c, Order::Inverse)?),
        pp: half(static_mode_sum(lat, c, Order::Gamma)?),
        gap: 2.0 * c.omega(),
    })
}

impl GroundStateCovariance {
    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn couplings(&self) -> &Couplings {
        &self.couplings
    }

    /// `⟨q_0 q_z⟩` indexed by the site `z`.
    pub fn qq(&self) -> &[f64] {
        &self.qq
    }

    pub fn pp(&self) -> &[f64] {
        &self.pp
    }

    /// Lowest excitation energy `2ω`.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Symmetrised covariance `⟨B(f) B(g) + B(g) B(f)⟩ / 2`.
    pub fn cross(&self, f: &WeylFunction, g: &WeylFunction) -> f64 {
        let lat = &self.lattice;
        let mut s = 0.0;
        for &x in f.support() {
            let fx = f.value(x);
            for &y in g.support() {
                let gy = g.value(y);
                let z = lat.sub(x, y);
                s += fx.re * gy.re * self.qq[z] + fx.im * gy.im * self.pp[z];
            }
        }
        s
    }

    fn check(&self, f: &WeylFunction) -> Result<()> {
        if f.site_count() != self.lattice.len() {
            return Err(Error::LatticeMismatch(format!(
                "function on {} sites, lattice has {}",
                f.site_count(),
                self.lattice.len()
            )));
        }
        Ok(())
    }
}

/// `⟨W(f)⟩` in the ground state.
pub fn weyl_expectation(cov: &GroundStateCovariance, f: &WeylFunction) -> Result<f64> {
    cov.check(f)?;
    Ok((-0.5 * cov.cross(f, f)).exp())
}

/// `⟨W(f) W(g)⟩ - ⟨W(f)⟩⟨W(g)⟩`, using `W(f)W(g) = e^{-(i/2) Im⟨f,g⟩} W(f+g)`.
/// Written as `⟨W(f)⟩⟨W(g)⟩ (e^z - 1)` so that tiny correlations keep their
/// relative accuracy.
pub fn weyl_correlation(cov: &GroundStateCovariance, f: &WeylFunction, g: &WeylFunction) -> Result<Complex64> {
    let prefactor = weyl_expectation(cov, f)? * weyl_expectation(cov, g)?;
    let z = Complex64::new(-cov.cross(f, g), -0.5 * symplectic_form(f, g)?);
    Ok(prefactor * exp_m1(z))
}

fn exp_m1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    // e^{x+iy} - 1 = (e^x - 1) e^{iy} + (e^{iy} - 1)
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp_m1() * s + s)
}

/// `ξ = (2(μ+ε) v(μ+ε) + γ) / (μ γ)`
pub fn xi_theorem(mu: f64, epsilon: f64, velocity: f64, gap: f64) -> Result<f64> {
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(invalid("gap", format!("must be positive, got {gap}")));
    }
    if !(mu > 0.0 && epsilon > 0.0 && velocity >= 0.0) {
        return Err(invalid("mu", "need mu > 0, epsilon > 0 and velocity >= 0"));
    }
    Ok((2.0 * (mu + epsilon) * velocity + gap) / (mu * gap))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringParams {
    pub mu: f64,
    pub epsilon: f64,
    pub amp_f: Complex64,
    pub amp_g: Complex64,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            epsilon: 1.0,
            amp_f: Complex64::new(1.0, 0.0),
            amp_g: Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringFit {
    pub distances: Vec<usize>,
    /// correlation between `amp_f δ_0` and `amp_g δ_d` along the first axis
    pub correlations: Vec<Complex64>,
    /// `-1/slope` of `log |corr|` against `d`; `None` without a decaying fit
    pub fitted_xi: Option<f64>,
    pub xi_theorem: f64,
    /// set when some correlation is not positive and the fit used `|corr|`
    pub absolute_fit: bool,
    /// `max |corr(d)| e^{d/ξ}` over `d < ξ` (or the nearest distance if none)
    pub c_fit: f64,
    /// absolute accuracy of the correlations
    pub roundoff_floor: f64,
    /// `|corr(d)| <= c_fit e^{-d/ξ} + floor` for every `d >= ξ`
    pub dominated: bool,
}

impl ClusteringFit {
    pub fn tightness(&self) -> Option<f64> {
        self.fitted_xi.map(|x| x / self.xi_theorem)
    }

    pub fn envelope(&self, d: usize) -> f64 {
        self.c_fit * (-(d as f64) / self.xi_theorem).exp()
    }
}

/// Singleton correlations at distances `1..=L` and the clustering comparison.
/// A perturbation only enters through the velocity in `ξ`.
pub fn clustering_fit(
    cov: &GroundStateCovariance,
    params: &ClusteringParams,
    perturbation: Option<&PerturbationSpec>,
) -> Result<ClusteringFit> {
    let lat = &cov.lattice;
    let kappa = match perturbation {
        Some(p) if !p.is_zero() => kappa_v(p)?.value,
        _ => 0.0,
    };
    let b = AnharmonicBoundParams::new(
        params.mu,
        params.epsilon,
        cov.couplings.clone(),
        CnuDomain::Torus(lat.clone()),
    )?;
    let velocity = anharm_constants(&b, kappa)?.v;
    let xi = xi_theorem(params.mu, params.epsilon, velocity, cov.gap)?;

    let f = WeylFunction::delta(lat.len(), lat.origin(), params.amp_f)?;
    let distances: Vec<usize> = (1..=lat.half_side()).collect();
    let correlations = distances
        .iter()
        .map(|&d| {
            weyl_correlation(
                cov,
                &f,
                &WeylFunction::delta(lat.len(), lat.axis_site(d), params.amp_g)?,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let scale = (cov.qq[lat.origin()] + cov.pp[lat.origin()]) * params.amp_f.norm() * params.amp_g.norm();
    let roundoff_floor = 64.0 * f64::EPSILON * scale;
    let absolute_fit = correlations.iter().any(|c| c.re <= 0.0);
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .zip(&correlations)
        .filter(|(_, c)| c.norm() > FIT_FLOOR_FACTOR * roundoff_floor)
        .map(|(&d, c)| (d as f64, c.norm().ln()))
        .collect();
    let fitted_xi = least_squares(&pts).and_then(|(slope, _)| (slope < 0.0).then(|| -1.0 / slope));

    let weighted = |(d, c): (&usize, &Complex64)| c.norm() * (*d as f64 / xi).exp();
    let inside = distances
        .iter()
        .zip(&correlations)
        .filter(|(d, _)| (**d as f64) < xi)
        .map(weighted)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    let c_fit = match inside {
        Some(c) => c,
        None => distances.iter().zip(&correlations).next().map_or(0.0, weighted),
    };
    let dominated = distances
        .iter()
        .zip(&correlations)
        .filter(|(d, _)| **d as f64 >= xi)
        .all(|(&d, c)| c.norm() <= c_fit * (-(d as f64) / xi).exp() + roundoff_floor);
    Ok(ClusteringFit {
        distances,
        correlations,
        fitted_xi,
        xi_theorem: xi,
        absolute_fit,
        c_fit,
        roundoff_floor,
        dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn decoupled_sites() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let c = Couplings::isotropic(1.5, 0.0, 1).unwrap();
        let cov = ground_covariance(&lat, &c).unwrap();
        for z in 0..lat.len() {
            let (q, p) = if z == lat.origin() {
                (1.0 / 3.0, 0.75)
            } else {
                (0.0, 0.0)
            };
            assert!((cov.qq()[z] - q).abs() < 1e-15);
            assert!((cov.pp()[z] - p).abs() < 1e-15);
        }
        let fit = clustering_fit(&cov, &ClusteringParams::default(), None).unwrap();
        assert!(fit.correlations.iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn even_real_and_uncertain() {
        let lat = TorusLattice::new(2, 3).unwrap();
        let c = Couplings::new(0.7, vec![1.0, 0.4]).unwrap();
        let cov = ground_covariance(&lat, &c).unwrap();
        for z in 0..lat.len() {
            assert!((cov.qq()[z] - cov.qq()[lat.neg(z)]).abs() < 1e-14);
            assert!((cov.pp()[z] - cov.pp()[lat.neg(z)]).abs() < 1e-14);
        }
        let o = lat.origin();
        assert!(cov.qq()[o] * cov.pp()[o] >= 0.25);
        assert_eq!(cov.gap(), 1.4);
    }

    #[test]
    fn massless_is_rejected() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let c = Couplings::isotropic(0.0, 1.0, 1).unwrap();
        assert!(matches!(ground_covariance(&lat, &c), Err(Error::SingularMode { .. })));
    }

    #[test]
    fn identity_has_no_correlation() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let cov = ground_covariance(&lat, &Couplings::isotropic(1.0, 1.0, 1).unwrap()).unwrap();
        let f = WeylFunction::delta(lat.len(), 2, c64(0.3, 0.8)).unwrap();
        let zero = WeylFunction::zero(lat.len());
        assert_eq!(weyl_correlation(&cov, &f, &zero).unwrap(), c64(0.0, 0.0));
    }

    #[test]
    fn swapping_arguments_conjugates() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let cov = ground_covariance(&lat, &Couplings::isotropic(1.0, 1.0, 1).unwrap()).unwrap();
        let f = WeylFunction::new(lat.len(), &[(1, c64(0.3, 0.8)), (2, c64(-0.4, 0.1))]).unwrap();
        let g = WeylFunction::new(lat.len(), &[(2, c64(0.5, -0.2)), (5, c64(0.1, 0.9))]).unwrap();
        let a = weyl_correlation(&cov, &f, &g).unwrap();
        let b = weyl_correlation(&cov, &g, &f).unwrap();
        assert!(a.im.abs() > 1e-3);
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn larger_gap_shortens_xi() {
        let v = |w: f64| {
            let c = Couplings::isotropic(w, 1.0, 1).unwrap();
            let lat = TorusLattice::new(1, 8).unwrap();
            let cov = ground_covariance(&lat, &c).unwrap();
            clustering_fit(&cov, &ClusteringParams::default(), None)
                .unwrap()
                .xi_theorem
        };
        assert!(v(4.0) < v(2.0));
        assert!(xi_theorem(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn gapped_chain_clusters() {
        let lat = TorusLattice::new(1, 32).unwrap();
        let cov = ground_covariance(&lat, &Couplings::isotropic(2.0, 1.0, 1).unwrap()).unwrap();
        let fit = clustering_fit(&cov, &ClusteringParams::default(), None).unwrap();
        let xi = fit.fitted_xi.unwrap();
        assert!(xi > 0.0 && xi.is_finite());
        assert!(fit.dominated);
        assert!(fit.tightness().unwrap() < 1.0);
    }
}
