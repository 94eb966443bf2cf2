//! Quadrature over unbounded intervals.
//!
//! The `quadrature` crate integrates finite intervals with the tanh-sinh rule.
//! Half-lines are covered by dyadic shells `[2^{k-1}, 2^k]`; the sum stops once
//! two consecutive shells contribute less than the requested relative
//! tolerance, and reports divergence if the shells never shrink.

use crate::error::{Error, Result};

const MAX_SHELLS: u32 = 64;
const MIN_SHELLS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> Integral {
    let out = quadrature::double_exponential::integrate(f, a, b, abs_tol);
    Integral {
        value: out.integral,
        error_estimate: out.error_estimate,
        evaluations: out.num_function_evaluations as usize,
    }
}

/// `∫_0^∞ f`.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<Integral> {
    let first = integrate_interval(&f, 0.0, 1.0, 1e-15);
    let mut total = first;
    let mut quiet = 0;
    let mut last = first.value;
    for k in 1..=MAX_SHELLS {
        let lo = 2f64.powi(k as i32 - 1);
        let tol = (rel_tol * 1e-3 * total.value.abs()).max(1e-300);
        let shell = integrate_interval(&f, lo, 2.0 * lo, tol);
        if !shell.value.is_finite() {
            return Err(Error::Divergence {
                partial: total.value,
                tail: shell.value,
            });
        }
        total.value += shell.value;
        total.error_estimate += shell.error_estimate;
        total.evaluations += shell.evaluations;
        last = shell.value;
        if shell.value.abs() <= rel_tol * total.value.abs() {
            quiet += 1;
        } else {
            quiet = 0;
        }
        if quiet >= 2 && k >= MIN_SHELLS {
            // the remaining tail is bounded by a geometric continuation of the last shell
            total.error_estimate += shell.value.abs();
            return Ok(total);
        }
    }
    Err(Error::Divergence {
        partial: total.value,
        tail: last,
    })
}

/// `∫_{-∞}^{∞} f`.
pub fn integrate_line<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> Result<Integral> {
    let right = integrate_half_line(&f, rel_tol)?;
    let left = integrate_half_line(|s| f(-s), rel_tol)?;
    Ok(Integral {
        value: right.value + left.value,
        error_estimate: right.error_estimate + left.error_estimate,
        evaluations: right.evaluations + left.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_moments() {
        let g = integrate_line(|s| (-0.5 * s * s).exp(), 1e-12).unwrap();
        assert!((g.value - (2.0 * PI).sqrt()).abs() < 1e-12);
        let m = integrate_line(|s| s.abs() * (-0.5 * s * s).exp(), 1e-12).unwrap();
        assert!((m.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn algebraic_tail() {
        let r = integrate_half_line(|s| 1.0 / (1.0 + s * s), 1e-10).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn divergent_tail_reported() {
        match integrate_half_line(|s| 1.0 / (1.0 + s), 1e-10) {
            Err(Error::Divergence { partial, tail }) => {
                assert!(partial > 10.0);
                assert!(tail > 0.5);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn zero_integrand() {
        assert_eq!(integrate_line(|_| 0.0, 1e-10).unwrap().value, 0.0);
    }
}
