//! Periodic cubic lattice `(-L, L]^nu`, its dual momentum grid and the
//! harmonic dispersion relation.
//!
//! Sites are enumerated row-major over `(-L+1, ..., L)^nu` with the first
//! coordinate varying slowest. Every array indexed by sites in this crate uses
//! that enumeration, and dual point `i` is `sites[i] * pi / L`.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Finite site set with an integer-valued metric.
///
/// Implemented by the torus and by the small chains/rings of the Fock-space
/// oracle, so bound evaluators can be shared between them.
pub trait SiteMetric {
    fn site_count(&self) -> usize;
    fn distance(&self, x: usize, y: usize) -> usize;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticeShape {
    pub nu: usize,
    pub half_side: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusLattice {
    nu: usize,
    half_side: usize,
    len: usize,
    coords: Vec<i64>,
}

impl TorusLattice {
    pub fn new(nu: usize, half_side: usize) -> Result<Self> {
        if nu == 0 {
            return Err(invalid("nu", "dimension must be positive"));
        }
        if half_side == 0 {
            return Err(invalid("L", "half side length must be positive"));
        }
        let side = 2 * half_side;
        let len = side
            .checked_pow(nu as u32)
            .ok_or_else(|| invalid("L", "lattice too large"))?;
        let l = half_side as i64;
        let mut coords = Vec::with_capacity(len * nu);
        for i in 0..len {
            let mut rest = i;
            let start = coords.len();
            coords.resize(start + nu, 0);
            for axis in (0..nu).rev() {
                coords[start + axis] = (rest % side) as i64 - l + 1;
                rest /= side;
            }
        }
        Ok(Self {
            nu,
            half_side,
            len,
            coords,
        })
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn half_side(&self) -> usize {
        self.half_side
    }

    /// Number of points per axis, `2L`.
    pub fn side(&self) -> usize {
        2 * self.half_side
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn shape(&self) -> LatticeShape {
        LatticeShape {
            nu: self.nu,
            half_side: self.half_side,
        }
    }

    pub fn coords(&self, i: usize) -> &[i64] {
        &self.coords[i * self.nu..(i + 1) * self.nu]
    }

    pub fn origin(&self) -> usize {
        self.index_of_wrapped(&vec![0; self.nu])
    }

    /// Index of a site given in canonical coordinates.
    pub fn index_of(&self, coord: &[i64]) -> Result<usize> {
        self.check_coord(coord)?;
        Ok(self.index_of_wrapped(coord))
    }

    fn check_coord(&self, coord: &[i64]) -> Result<()> {
        let l = self.half_side as i64;
        if coord.len() != self.nu || coord.iter().any(|&c| c <= -l || c > l) {
            return Err(Error::SiteOutOfRange {
                coord: coord.to_vec(),
                half_side: l,
                nu: self.nu,
            });
        }
        Ok(())
    }

    /// Index of an arbitrary integer point after reduction onto the torus.
    pub fn index_of_wrapped(&self, coord: &[i64]) -> usize {
        let side = self.side() as i64;
        let l = self.half_side as i64;
        coord.iter().fold(0usize, |acc, &c| {
            acc * self.side() + (c + l - 1).rem_euclid(side) as usize
        })
    }

    /// Dual grid point `k = x * pi / L` aligned with site `i`.
    pub fn dual_point(&self, i: usize) -> Vec<f64> {
        let scale = PI / self.half_side as f64;
        self.coords(i).iter().map(|&c| c as f64 * scale).collect()
    }

    /// Index of `-x` (equivalently `-k` on the dual grid) with the convention
    /// that the boundary coordinate `L` maps to itself.
    pub fn neg(&self, i: usize) -> usize {
        let neg: Vec<i64> = self.coords(i).iter().map(|&c| -c).collect();
        self.index_of_wrapped(&neg)
    }

    /// Index of `x - y` reduced onto the torus.
    pub fn sub(&self, x: usize, y: usize) -> usize {
        let side = self.side() as i64;
        let l = self.half_side as i64;
        self.coords(x).iter().zip(self.coords(y)).fold(0usize, |acc, (a, b)| {
            acc * self.side() + (a - b + l - 1).rem_euclid(side) as usize
        })
    }

    /// Torus distance from the origin, i.e. `|x|` of the canonical representative.
    pub fn norm(&self, i: usize) -> usize {
        self.coords(i).iter().map(|c| c.unsigned_abs() as usize).sum()
    }

    /// Torus distance between two points given by coordinates.
    pub fn torus_distance(&self, x: &[i64], y: &[i64]) -> Result<usize> {
        self.check_coord(x)?;
        self.check_coord(y)?;
        Ok(self.axis_distance_sum(x, y))
    }

    fn axis_distance_sum(&self, x: &[i64], y: &[i64]) -> usize {
        let side = self.side() as i64;
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let d = (a - b).rem_euclid(side);
                d.min(side - d) as usize
            })
            .sum()
    }

    /// Site at offset `r` from the origin along the first axis.
    pub fn axis_site(&self, r: usize) -> usize {
        let mut coord = vec![0i64; self.nu];
        coord[0] = r as i64;
        self.index_of_wrapped(&coord)
    }
}

impl SiteMetric for TorusLattice {
    fn site_count(&self) -> usize {
        self.len
    }

    fn distance(&self, x: usize, y: usize) -> usize {
        self.axis_distance_sum(self.coords(x), self.coords(y))
    }
}

/// On-site frequency and bond couplings of the harmonic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    omega: f64,
    lambda: Vec<f64>,
}

impl Couplings {
    pub fn new(omega: f64, lambda: Vec<f64>) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(invalid("omega", format!("must be finite and >= 0, got {omega}")));
        }
        if lambda.is_empty() {
            return Err(invalid("lambda", "need one coupling per lattice direction"));
        }
        if let Some(bad) = lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(invalid("lambda", format!("must be finite and >= 0, got {bad}")));
        }
        if omega == 0.0 && lambda.iter().all(|&l| l == 0.0) {
            return Err(invalid("couplings", "all parameters vanish (c_{omega,lambda} = 0)"));
        }
        Ok(Self { omega, lambda })
    }

    /// Uniform bond coupling in every one of `nu` directions.
    pub fn isotropic(omega: f64, lambda: f64, nu: usize) -> Result<Self> {
        Self::new(omega, vec![lambda; nu])
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn nu(&self) -> usize {
        self.lambda.len()
    }

    /// `c = sqrt(omega^2 + 4 sum_j lambda_j)`, the largest mode frequency.
    pub fn c_max(&self) -> f64 {
        (self.omega * self.omega + 4.0 * self.lambda.iter().sum::<f64>()).sqrt()
    }

    pub fn is_gapped(&self) -> bool {
        self.omega > 0.0
    }

    pub(crate) fn check_lattice(&self, lat: &TorusLattice) -> Result<()> {
        if self.nu() != lat.nu() {
            return Err(Error::LatticeMismatch(format!(
                "couplings carry {} bond parameters but the lattice has dimension {}",
                self.nu(),
                lat.nu()
            )));
        }
        Ok(())
    }
}

/// `gamma(k) = sqrt(omega^2 + 4 sum_j lambda_j sin^2(k_j / 2))`.
pub fn dispersion(c: &Couplings, k: &[f64]) -> f64 {
    let bonds: f64 = c
        .lambda
        .iter()
        .zip(k)
        .map(|(l, kj)| {
            let s = (0.5 * kj).sin();
            l * s * s
        })
        .sum();
    (c.omega * c.omega + 4.0 * bonds).sqrt()
}

/// Dispersion sampled on the whole dual grid, index-aligned with the sites.
pub fn dispersion_table(lat: &TorusLattice, c: &Couplings) -> Vec<f64> {
    (0..lat.len()).map(|i| dispersion(c, &lat.dual_point(i))).collect()
}
