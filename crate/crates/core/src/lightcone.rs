//! Empirical propagation fronts of exact commutator data and the optimal
//! decay rate of the harmonic bound.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::kernels::{compute_evolution_kernels, harmonic_velocity};
use crate::torus::{Couplings, TorusLattice};
use crate::weyl::{commutator_norm, evolve, WeylFunction};

/// Distances below this are left out of the velocity fit.
pub const FIT_MIN_DISTANCE: usize = 3;

fn mu_equation(mu: f64) -> f64 {
    2.0 / mu - (0.5 * mu + 1.0).exp()
}

/// Root of `2/mu = e^{mu/2 + 1}` on `(1/2, 1)`, bisected to width `1e-12`.
pub fn optimal_mu() -> f64 {
    let (mut lo, mut hi) = (0.5, 1.0);
    debug_assert!(mu_equation(lo) > 0.0 && mu_equation(hi) < 0.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mu_equation(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalRate {
    pub mu0: f64,
    /// `v_h(mu0) = 2c/mu0`
    pub velocity: f64,
}

pub fn mu_star(c: &Couplings) -> OptimalRate {
    let mu0 = optimal_mu();
    let velocity = harmonic_velocity(c, mu0);
    assert!(mu0 > 0.5 && mu0 < 1.0);
    assert!(velocity <= 4.0 * c.c_max());
    OptimalRate { mu0, velocity }
}

/// Commutator norms `values[i][j]` at distance `distances[i]` and time `times[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorSeries {
    pub times: Vec<f64>,
    pub distances: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl CommutatorSeries {
    pub fn new(times: Vec<f64>, distances: Vec<usize>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "grid must be strictly increasing"));
        }
        if values.len() != distances.len() || values.iter().any(|row| row.len() != times.len()) {
            return Err(invalid("values", "shape must be distances x times"));
        }
        Ok(Self {
            times,
            distances,
            values,
        })
    }
}

/// Exact commutator norms between `amp_f δ_0` and `amp_g δ_r` for `r` along the
/// first axis.
pub fn axis_series(
    lat: &TorusLattice,
    c: &Couplings,
    amp_f: Complex64,
    amp_g: Complex64,
    distances: &[usize],
    times: &[f64],
) -> Result<CommutatorSeries> {
    if let Some(&r) = distances.iter().find(|&&r| r > lat.half_side()) {
        return Err(invalid(
            "distances",
            format!("{r} exceeds the half side {}", lat.half_side()),
        ));
    }
    let f = WeylFunction::delta(lat.len(), lat.origin(), amp_f)?;
    let targets = distances
        .iter()
        .map(|&r| WeylFunction::delta(lat.len(), lat.axis_site(r), amp_g))
        .collect::<Result<Vec<_>>>()?;
    let mut values = vec![Vec::with_capacity(times.len()); distances.len()];
    for &t in times {
        let (h1, h2) = compute_evolution_kernels(lat, c, t, !c.is_gapped())?;
        let f_t = evolve(lat, &f, &h1, &h2)?;
        for (row, g) in values.iter_mut().zip(&targets) {
            row.push(commutator_norm(&f_t, g)?);
        }
    }
    CommutatorSeries::new(times.to_vec(), distances.to_vec(), values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontData {
    pub threshold: f64,
    /// `(r, t*(r))` in the order of the input distances
    pub arrivals: Vec<(usize, f64)>,
    /// distances whose series never reach the threshold
    pub unreached: Vec<usize>,
    /// slope of `r` against `t*(r)` over `r >= FIT_MIN_DISTANCE`
    pub fitted_velocity: Option<f64>,
    /// root-mean-square residual of that fit, in units of distance
    pub fit_residual: f64,
}

impl FrontData {
    pub fn is_monotone(&self) -> bool {
        let mut sorted = self.arrivals.clone();
        sorted.sort_by_key(|a| a.0);
        sorted.windows(2).all(|w| w[1].1 >= w[0].1)
    }
}

/// First grid crossing of `threshold`, linearly interpolated.
fn first_crossing(times: &[f64], row: &[f64], threshold: f64) -> Option<f64> {
    let i = row.iter().position(|v| *v >= threshold)?;
    if i == 0 {
        return Some(times[0]);
    }
    let (v0, v1) = (row[i - 1], row[i]);
    let w = (threshold - v0) / (v1 - v0);
    Some(times[i - 1] + w * (times[i] - times[i - 1]))
}

pub fn extract_front(series: &CommutatorSeries, threshold: f64) -> Result<FrontData> {
    if !(threshold > 0.0 && threshold < 2.0) {
        return Err(invalid("threshold", format!("must lie in (0, 2), got {threshold}")));
    }
    let mut arrivals = Vec::new();
    let mut unreached = Vec::new();
    for (r, row) in series.distances.iter().zip(&series.values) {
        match first_crossing(&series.times, row, threshold) {
            Some(t) => arrivals.push((*r, t)),
            None => unreached.push(*r),
        }
    }
    let pts: Vec<(f64, f64)> = arrivals
        .iter()
        .filter(|(r, _)| *r >= FIT_MIN_DISTANCE)
        .map(|&(r, t)| (t, r as f64))
        .collect();
    let (fitted_velocity, fit_residual) = match least_squares(&pts) {
        Some((slope, intercept)) => {
            let ss: f64 = pts.iter().map(|(t, r)| (r - slope * t - intercept).powi(2)).sum();
            (Some(slope), (ss / pts.len() as f64).sqrt())
        }
        None => (None, 0.0),
    };
    Ok(FrontData {
        threshold,
        arrivals,
        unreached,
        fitted_velocity,
        fit_residual,
    })
}

/// Slope and intercept of `y = a x + b`; `None` with fewer than two distinct `x`.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}

/// Largest relative deviation of the fitted velocities from their mean.
pub fn velocity_spread(fronts: &[FrontData]) -> Option<f64> {
    let v: Vec<f64> = fronts.iter().map(|f| f.fitted_velocity).collect::<Option<_>>()?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    Some((max - min) / mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optimal_mu_bracket_and_value() {
        assert!(mu_equation(0.5) > 0.0);
        assert!(mu_equation(1.0) < 0.0);
        let mu = optimal_mu();
        assert!((mu - 0.556_929).abs() < 1e-6, "{mu}");
        assert!(mu_equation(mu).abs() < 1e-10);
    }

    #[test]
    fn optimal_velocity_is_at_most_four_c() {
        for (w, l) in [(1.0, 1.0), (0.1, 2.0), (2.0, 0.0)] {
            let c = Couplings::isotropic(w, l, 1).unwrap();
            let r = mu_star(&c);
            assert!((r.velocity - 2.0 * c.c_max() / r.mu0).abs() < 1e-9 * r.velocity);
            assert!(r.velocity <= 4.0 * c.c_max());
        }
    }

    #[test]
    fn synthetic_front() {
        let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let distances: Vec<usize> = (0..=9).collect();
        // a ramp crossing 1 exactly at t = r/3
        let values = distances
            .iter()
            .map(|&r| times.iter().map(|t| (t - r as f64 / 3.0 + 1.0).max(0.0)).collect())
            .collect();
        let s = CommutatorSeries::new(times, distances, values).unwrap();
        let front = extract_front(&s, 1.0).unwrap();
        assert!(front.unreached.is_empty());
        for (r, t) in &front.arrivals {
            assert!((t - *r as f64 / 3.0).abs() < 1e-12);
        }
        assert!((front.fitted_velocity.unwrap() - 3.0).abs() < 1e-10);
        assert!(front.fit_residual < 1e-10);
        assert!(front.is_monotone());
    }

    #[test]
    fn nothing_reached() {
        let s = CommutatorSeries::new(vec![0.0, 1.0], vec![1, 2, 3], vec![vec![0.0, 1e-5]; 3]).unwrap();
        let front = extract_front(&s, 1e-3).unwrap();
        assert!(front.arrivals.is_empty());
        assert_eq!(front.unreached, vec![1, 2, 3]);
        assert_eq!(front.fitted_velocity, None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CommutatorSeries::new(vec![0.0, 0.0], vec![1], vec![vec![0.0, 0.0]]).is_err());
        assert!(CommutatorSeries::new(vec![0.0, 1.0], vec![1], vec![vec![0.0]]).is_err());
        let s = CommutatorSeries::new(vec![0.0], vec![1], vec![vec![0.0]]).unwrap();
        assert!(extract_front(&s, 2.0).is_err());
        assert!(extract_front(&s, 0.0).is_err());
    }
}
