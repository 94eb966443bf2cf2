//! Lattice sums with the l1 norm `|z| = Σ|z_j|`.

use crate::torus::TorusLattice;

/// `ζ(s) - 1 = Σ_{n≥2} n^{-s}` for `s > 1`, by Euler-Maclaurin with cutoff 16.
pub fn zeta_minus_one(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1, got {s}");
    const N: usize = 16;
    // B_{2j} / (2j)!
    const B: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (2..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // derivative factor s (s+1) ... (s+2j-2) n^{-s-2j+1}
    let mut rising = s;
    for (j, b) in B.iter().enumerate() {
        let p = 2 * j + 1;
        sum += b * rising * n.powf(-s - p as f64);
        rising *= (s + p as f64) * (s + p as f64 + 1.0);
    }
    sum
}

/// Number of points of `Z^nu` with `|z| = r`, as a polynomial in `u = 1 + r`
/// valid for `r ≥ 1` (coefficients in increasing degree).
fn shell_polynomial(nu: usize) -> Vec<f64> {
    let mut total = vec![0.0; nu.max(1)];
    for k in 1..=nu {
        // 2^k C(nu, k) C(r-1, k-1), where each factor r - i equals u - 1 - i
        let mut poly = vec![1.0];
        for i in 1..k {
            let mut next = vec![0.0; poly.len() + 1];
            for (d, c) in poly.iter().enumerate() {
                next[d + 1] += c / i as f64;
                next[d] -= c * (1 + i) as f64 / i as f64;
            }
            poly = next;
        }
        let w = 2f64.powi(k as i32) * binomial(nu, k);
        for (d, c) in poly.iter().enumerate() {
            total[d] += w * c;
        }
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `Σ_{z ∈ Z^nu} (1 + |z|)^{-nu-1}`, summed shell by shell in closed form.
pub fn power_sum_zd(nu: usize) -> f64 {
    let s = (nu + 1) as f64;
    1.0 + shell_polynomial(nu)
        .iter()
        .enumerate()
        .map(|(j, c)| c * zeta_minus_one(s - j as f64))
        .sum::<f64>()
}

/// `Σ_{z ∈ Λ_L} (1 + |z|)^{-nu-1}` with the torus norm.
pub fn power_sum_torus(lat: &TorusLattice) -> f64 {
    let p = (lat.nu() + 1) as i32;
    (0..lat.len()).map(|z| (1.0 + lat.norm(z) as f64).powi(-p)).sum()
}

/// `Σ_{z ∈ Z^nu} e^{-b|z|} = coth(b/2)^nu`.
pub fn exp_sum_zd(b: f64, nu: usize) -> f64 {
    (1.0 / (0.5 * b).tanh()).powi(nu as i32)
}
