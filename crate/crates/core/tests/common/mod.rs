//! Oracles shared by the integration tests. Nothing here calls the kernel code.
#![allow(dead_code)]

use std::f64::consts::PI;

use lrlattice::TorusLattice;
use num_complex::Complex64;

fn gamma(omega: f64, lambda: &[f64], k: &[f64]) -> f64 {
    let s: f64 = lambda
        .iter()
        .zip(k)
        .map(|(l, kj)| 4.0 * l * (0.5 * kj).sin().powi(2))
        .sum();
    (omega * omega + s).sqrt()
}

fn phase(lat: &TorusLattice, k: usize, x: usize) -> f64 {
    let l = lat.half_side() as f64;
    lat.coords(k)
        .iter()
        .zip(lat.coords(x))
        .map(|(a, b)| (*a as f64) * (*b as f64) * PI / l)
        .sum()
}

/// Evolves the q- and p-coefficients `a = Re f`, `b = Im f` of a Weyl
/// argument one Fourier mode at a time:
/// `da/dt = -2 γ² b`, `db/dt = 2 a`.
pub fn mode_space_evolve(lat: &TorusLattice, omega: f64, lambda: &[f64], f: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = lat.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for k in 0..n {
        let kvec: Vec<f64> = lat
            .coords(k)
            .iter()
            .map(|v| *v as f64 * PI / lat.half_side() as f64)
            .collect();
        let g = gamma(omega, lambda, &kvec);
        let mut a_hat = Complex64::new(0.0, 0.0);
        let mut b_hat = Complex64::new(0.0, 0.0);
        for (x, fx) in f.iter().enumerate() {
            let e = Complex64::from_polar(1.0, -phase(lat, k, x));
            a_hat += fx.re * e;
            b_hat += fx.im * e;
        }
        let th = 2.0 * g * t;
        let (a_t, b_t) = if g == 0.0 {
            (a_hat, b_hat + 2.0 * t * a_hat)
        } else {
            (
                a_hat * th.cos() - b_hat * (g * th.sin()),
                b_hat * th.cos() + a_hat * (th.sin() / g),
            )
        };
        for (x, o) in out.iter_mut().enumerate() {
            let e = Complex64::from_polar(1.0 / n as f64, phase(lat, k, x));
            // a and b are real fields, so their inverse transforms are real
            *o += Complex64::new((a_t * e).re, (b_t * e).re);
        }
    }
    out
}

/// `(1/|Λ|) Σ_k γ^m e^{ik·x - 2iγt}` by direct summation.
pub fn brute_fourier_sum(lat: &TorusLattice, omega: f64, lambda: &[f64], m: i32, t: f64, x: usize) -> Complex64 {
    let n = lat.len() as f64;
    (0..lat.len())
        .map(|k| {
            let kvec: Vec<f64> = lat
                .coords(k)
                .iter()
                .map(|v| *v as f64 * PI / lat.half_side() as f64)
                .collect();
            let g = gamma(omega, lambda, &kvec);
            Complex64::from_polar(g.powi(m) / n, phase(lat, k, x) - 2.0 * g * t)
        })
        .sum()
}
