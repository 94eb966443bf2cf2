//! Commutator bounds for bounded interactions on a finite metric graph.
//!
//! Only the norms `‖Φ(Z)‖` of the interaction terms enter the bounds, so an
//! [`InteractionGraph`] stores a metric table and a list of `(Z, ‖Φ(Z)‖)`.

use crate::error::{invalid, Error, Result};
use crate::sums::power_sum_zd;
use crate::torus::SiteMetric;

const METRIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DecayProfile {
    /// `(1 + r)^{-exponent}`
    Polynomial { exponent: f64 },
    /// piecewise linear through `(r, F(r))`, constant past the last point
    Tabulated { points: Vec<(f64, f64)> },
}

/// `F_a(r) = e^{-a r} F(r)` for a positive non-increasing `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFunction {
    profile: DecayProfile,
    a: f64,
}

impl DecayFunction {
    pub fn polynomial(exponent: f64, a: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(invalid("exponent", format!("must be >= 0, got {exponent}")));
        }
        Self::with_profile(DecayProfile::Polynomial { exponent }, a)
    }

    /// `(1 + r)^{-nu-1}`
    pub fn lattice_power(nu: usize, a: f64) -> Result<Self> {
        Self::polynomial((nu + 1) as f64, a)
    }

    pub fn tabulated(points: Vec<(f64, f64)>, a: f64) -> Result<Self> {
        if points.first().map(|p| p.0) != Some(0.0) {
            return Err(invalid("points", "table must start at r = 0"));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid("points", "radii must be strictly increasing"));
            }
            if w[1].1 > w[0].1 {
                return Err(invalid("points", "F must be non-increasing"));
            }
        }
        if points.iter().any(|p| !(p.1.is_finite() && p.1 > 0.0)) {
            return Err(invalid("points", "F must be positive and finite"));
        }
        Self::with_profile(DecayProfile::Tabulated { points }, a)
    }

    fn with_profile(profile: DecayProfile, a: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(invalid("a", format!("must be >= 0, got {a}")));
        }
        Ok(Self { profile, a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn profile(&self) -> &DecayProfile {
        &self.profile
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        Self::with_profile(self.profile.clone(), a)
    }

    /// `F(r)`
    pub fn base(&self, r: f64) -> f64 {
        match &self.profile {
            DecayProfile::Polynomial { exponent } => (1.0 + r).powf(-exponent),
            DecayProfile::Tabulated { points } => {
                let i = points.partition_point(|p| p.0 <= r);
                if i >= points.len() {
                    return points[points.len() - 1].1;
                }
                let (r0, f0) = points[i - 1];
                let (r1, f1) = points[i];
                f0 + (f1 - f0) * (r - r0) / (r1 - r0)
            }
        }
    }

    /// `F_a(r)`
    pub fn eval(&self, r: f64) -> f64 {
        (-self.a * r).exp() * self.base(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    pub sites: Vec<usize>,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    n: usize,
    dist: Vec<f64>,
    terms: Vec<InteractionTerm>,
}

impl InteractionGraph {
    /// Graph from a full distance table; the metric axioms are checked for every triple.
    pub fn new(dist: Vec<Vec<f64>>, terms: Vec<InteractionTerm>) -> Result<Self> {
        let n = dist.len();
        if dist.iter().any(|row| row.len() != n) {
            return Err(invalid("metric", "distance table must be square"));
        }
        let flat: Vec<f64> = dist.into_iter().flatten().collect();
        check_metric(n, &flat)?;
        let mut terms = terms;
        for term in &mut terms {
            if term.sites.is_empty() {
                return Err(invalid("terms", "interaction support must be nonempty"));
            }
            if let Some(&x) = term.sites.iter().find(|&&x| x >= n) {
                return Err(invalid("terms", format!("site {x} not in the graph")));
            }
            if !(term.norm.is_finite() && term.norm >= 0.0) {
                return Err(invalid("terms", format!("norm must be >= 0, got {}", term.norm)));
            }
            term.sites.sort_unstable();
            term.sites.dedup();
        }
        Ok(Self { n, dist: flat, terms })
    }

    pub fn from_metric<M: SiteMetric>(metric: &M, terms: Vec<InteractionTerm>) -> Result<Self> {
        let n = metric.site_count();
        let dist = (0..n)
            .map(|x| (0..n).map(|y| metric.distance(x, y) as f64).collect())
            .collect();
        Self::new(dist, terms)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    pub fn terms(&self) -> &[InteractionTerm] {
        &self.terms
    }

    /// `min_{x ∈ X, y ∈ Y} d(x, y)`
    pub fn set_distance(&self, xs: &[usize], ys: &[usize]) -> Option<f64> {
        xs.iter()
            .flat_map(|&x| ys.iter().map(move |&y| self.distance(x, y)))
            .min_by(f64::total_cmp)
    }

    fn check_subset(&self, name: &'static str, xs: &[usize]) -> Result<()> {
        match xs.iter().find(|&&x| x >= self.n) {
            Some(x) => Err(invalid(name, format!("site {x} not in the graph"))),
            None => Ok(()),
        }
    }
}

fn check_metric(n: usize, d: &[f64]) -> Result<()> {
    let at = |x: usize, y: usize| d[x * n + y];
    for x in 0..n {
        if at(x, x) != 0.0 {
            return Err(invalid("metric", format!("d({x},{x}) = {} != 0", at(x, x))));
        }
        for y in 0..n {
            let v = at(x, y);
            if !v.is_finite() || v < 0.0 || (x != y && v == 0.0) {
                return Err(invalid("metric", format!("d({x},{y}) = {v} is not a distance")));
            }
            if v != at(y, x) {
                return Err(invalid("metric", format!("d({x},{y}) != d({y},{x})")));
            }
            for z in 0..n {
                if v > at(x, z) + at(z, y) + METRIC_TOL * v {
                    return Err(invalid(
                        "metric",
                        format!("triangle inequality fails for ({x},{z},{y})"),
                    ));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConstants {
    /// `‖F_a‖ = sup_x Σ_y F_a(d(x, y))`
    pub norm_f: f64,
    /// `C_a = sup_{x,y} Σ_z F_a(d(x,z)) F_a(d(z,y)) / F_a(d(x,y))`
    pub c_a: f64,
}

pub fn decay_constants(g: &InteractionGraph, f: &DecayFunction) -> Result<DecayConstants> {
    let n = g.n;
    let table: Vec<f64> = g.dist.iter().map(|&r| f.eval(r)).collect();
    if let Some(i) = table.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(invalid(
            "decay",
            format!("F_a must be positive, got {} at r = {}", table[i], g.dist[i]),
        ));
    }
    let mut norm_f: f64 = 0.0;
    let mut c_a: f64 = 0.0;
    for x in 0..n {
        let row = &table[x * n..(x + 1) * n];
        norm_f = norm_f.max(row.iter().sum());
        for y in 0..n {
            let conv: f64 = (0..n).map(|z| row[z] * table[z * n + y]).sum();
            c_a = c_a.max(conv / row[y]);
        }
    }
    Ok(DecayConstants { norm_f, c_a })
}

/// `‖Φ‖_a = max_{x,y} F_a(d(x,y))^{-1} Σ_{Z ∋ x,y} ‖Φ(Z)‖`
pub fn interaction_norm(g: &InteractionGraph, f: &DecayFunction) -> f64 {
    let n = g.n;
    let mut acc = vec![0.0; n * n];
    for term in &g.terms {
        for &x in &term.sites {
            for &y in &term.sites {
                acc[x * n + y] += term.norm;
            }
        }
    }
    acc.iter()
        .zip(&g.dist)
        .filter(|(s, _)| **s > 0.0)
        .map(|(s, &r)| s / f.eval(r))
        .fold(0.0, f64::max)
}

/// `∂_Φ X`: sites of `X` lying in a nonzero term that also leaves `X`.
pub fn phi_boundary(g: &InteractionGraph, xs: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; g.n];
    for &x in xs {
        inside[x] = true;
    }
    let mut hit = vec![false; g.n];
    for term in g.terms.iter().filter(|t| t.norm > 0.0) {
        let meets = term.sites.iter().any(|&z| inside[z]);
        let leaves = term.sites.iter().any(|&z| !inside[z]);
        if meets && leaves {
            for &z in term.sites.iter().filter(|&&z| inside[z]) {
                hit[z] = true;
            }
        }
    }
    (0..g.n).filter(|&x| hit[x]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiBoundary {
    pub boundary_x: Vec<usize>,
    pub boundary_y: Vec<usize>,
    pub d_a: f64,
}

pub fn phi_boundary_and_d(g: &InteractionGraph, f: &DecayFunction, xs: &[usize], ys: &[usize]) -> Result<PhiBoundary> {
    g.check_subset("X", xs)?;
    g.check_subset("Y", ys)?;
    let boundary_x = phi_boundary(g, xs);
    let boundary_y = phi_boundary(g, ys);
    let weight = |a: &[usize], b: &[usize]| -> f64 {
        a.iter()
            .flat_map(|&x| b.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f.eval(g.distance(x, y)))
            .sum()
    };
    // a branch with an empty boundary is skipped; with both empty D_a = 0
    let d_a = match (boundary_x.is_empty(), boundary_y.is_empty()) {
        (false, false) => weight(&boundary_x, ys).min(weight(xs, &boundary_y)),
        (false, true) => weight(&boundary_x, ys),
        (true, false) => weight(xs, &boundary_y),
        (true, true) => 0.0,
    };
    Ok(PhiBoundary {
        boundary_x,
        boundary_y,
        d_a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiForm {
    Theorem,
    Corollary,
    /// `F(r) = (1 + r)^{-nu-1}` with the `Z^nu` constant
    LrExp {
        nu: usize,
    },
}

/// `e^{2‖Φ‖_a C_a |t|} - 1` for separated sets, without the `-1` otherwise.
pub fn growth_factor(phi_norm: f64, c_a: f64, t: f64, separated: bool) -> f64 {
    let x = 2.0 * phi_norm * c_a * t.abs();
    if separated {
        x.exp_m1()
    } else {
        x.exp()
    }
}

/// `C = 2^{nu+1} Σ_{z ∈ Z^nu} (1 + |z|)^{-nu-1}`
pub fn lrexp_constant(nu: usize) -> f64 {
    2f64.powi(nu as i32 + 1) * power_sum_zd(nu)
}

#[allow(clippy::too_many_arguments)]
pub fn theorem_phi_bound(
    g: &InteractionGraph,
    f: &DecayFunction,
    xs: &[usize],
    ys: &[usize],
    norm_a: f64,
    norm_b: f64,
    t: f64,
    form: PhiForm,
) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(invalid("support", "X and Y must be nonempty"));
    }
    for (name, v) in [("norm_a", norm_a), ("norm_b", norm_b)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(invalid(name, format!("must be >= 0, got {v}")));
        }
    }
    let pb = phi_boundary_and_d(g, f, xs, ys)?;
    let dxy = g.set_distance(xs, ys).unwrap_or(0.0);
    let boundary = pb.boundary_x.len().min(pb.boundary_y.len()) as f64;
    match form {
        PhiForm::Theorem | PhiForm::Corollary => {
            let k = decay_constants(g, f)?;
            if k.c_a == 0.0 {
                return Err(Error::DegenerateGraph("C_a = 0".into()));
            }
            let phi = interaction_norm(g, f);
            let pre = 2.0 * norm_a * norm_b / k.c_a;
            if form == PhiForm::Theorem {
                Ok(pre * growth_factor(phi, k.c_a, t, dxy > 0.0) * pb.d_a)
            } else {
                let plain = decay_constants(g, &f.with_a(0.0)?)?;
                let exponent = -f.a() * dxy + 2.0 * phi * k.c_a * t.abs();
                Ok(pre * plain.norm_f * boundary * exponent.exp())
            }
        }
        PhiForm::LrExp { nu } => {
            let a = f.a();
            if a <= 0.0 {
                return Err(invalid("a", "the exponential form needs a > 0"));
            }
            let lr = DecayFunction::lattice_power(nu, a)?;
            let phi = interaction_norm(g, &lr);
            let c = lrexp_constant(nu);
            let exponent = -(a * dxy - 2.0 * phi * c * t.abs());
            Ok(2f64.powi(-(nu as i32 + 1)) * norm_a * norm_b * boundary * exponent.exp())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|x| (0..n).map(|y| (x as f64 - y as f64).abs()).collect())
            .collect()
    }

    fn chain_terms(n: usize, j: f64) -> Vec<InteractionTerm> {
        (0..n - 1)
            .map(|x| InteractionTerm {
                sites: vec![x, x + 1],
                norm: j,
            })
            .collect()
    }

    #[test]
    fn single_site_constants() {
        let g = InteractionGraph::new(vec![vec![0.0]], vec![]).unwrap();
        let f = DecayFunction::polynomial(2.0, 0.7).unwrap();
        let k = decay_constants(&g, &f).unwrap();
        assert_eq!(k.norm_f, 1.0);
        assert_eq!(k.c_a, 1.0);
    }

    #[test]
    fn path_norm_at_center() {
        let g = InteractionGraph::new(path(11), vec![]).unwrap();
        let f = DecayFunction::polynomial(2.0, 0.0).unwrap();
        let k = decay_constants(&g, &f).unwrap();
        let direct: f64 = (-5i32..=5).map(|j| (1.0 + j.abs() as f64).powi(-2)).sum();
        assert!((k.norm_f - direct).abs() < 1e-15);
        for a in [0.5, 1.0, 2.0] {
            let ka = decay_constants(&g, &f.with_a(a).unwrap()).unwrap();
            assert!(ka.c_a <= k.c_a + 1e-15);
            assert!(ka.norm_f <= k.norm_f);
        }
    }

    #[test]
    fn interaction_norm_examples() {
        let f = DecayFunction::polynomial(2.0, 0.0).unwrap();
        let empty = InteractionGraph::new(path(4), vec![]).unwrap();
        assert_eq!(interaction_norm(&empty, &f), 0.0);
        let g = InteractionGraph::new(path(6), chain_terms(6, 1.5)).unwrap();
        // interior site pairs with itself through two bonds: 2J/F(0) = 3 < J/F(1) = 6
        assert_eq!(interaction_norm(&g, &f), 6.0);
    }

    #[test]
    fn boundaries() {
        let f = DecayFunction::polynomial(2.0, 1.0).unwrap();
        let g = InteractionGraph::new(path(8), chain_terms(8, 1.0)).unwrap();
        let pb = phi_boundary_and_d(&g, &f, &[2], &[6]).unwrap();
        assert_eq!(pb.boundary_x, vec![2]);
        assert_eq!(pb.boundary_y, vec![6]);
        assert!((pb.d_a - f.eval(4.0)).abs() < 1e-16);
        // only the bond (0, 1) is present: X = {5} has an empty boundary
        let lone = InteractionGraph::new(path(8), chain_terms(2, 1.0)).unwrap();
        let pb = phi_boundary_and_d(&lone, &f, &[5], &[1]).unwrap();
        assert!(pb.boundary_x.is_empty());
        assert_eq!(pb.boundary_y, vec![1]);
        assert!((pb.d_a - f.eval(4.0)).abs() < 1e-16);
        let pb = phi_boundary_and_d(&lone, &f, &[5], &[6]).unwrap();
        assert_eq!(pb.d_a, 0.0);
        let g0 = InteractionGraph::new(
            path(3),
            vec![InteractionTerm {
                sites: vec![0, 1],
                norm: 0.0,
            }],
        )
        .unwrap();
        assert!(phi_boundary(&g0, &[0]).is_empty());
    }

    #[test]
    fn theorem_values() {
        let f = DecayFunction::polynomial(2.0, 1.0).unwrap();
        let g = InteractionGraph::new(path(12), chain_terms(12, 1.0)).unwrap();
        let bound =
            |xs: &[usize], ys: &[usize], t| theorem_phi_bound(&g, &f, xs, ys, 1.0, 1.0, t, PhiForm::Theorem).unwrap();
        assert_eq!(bound(&[3], &[8], 0.0), 0.0);
        let k = decay_constants(&g, &f).unwrap();
        let overlap = bound(&[3, 4], &[4, 5], 0.0);
        let pb = phi_boundary_and_d(&g, &f, &[3, 4], &[4, 5]).unwrap();
        assert!((overlap - 2.0 * pb.d_a / k.c_a).abs() < 1e-14);
        // scalar recomputation at distance 5, t = 1
        let phi = interaction_norm(&g, &f);
        let want = 2.0 / k.c_a * (2.0 * phi * k.c_a).exp_m1() * f.eval(5.0);
        assert!((bound(&[3], &[8], 1.0) - want).abs() < 1e-12 * want);
        assert!(bound(&[3], &[8], 1.0) < bound(&[3], &[8], 1.5));
        assert!(bound(&[3], &[9], 1.0) < bound(&[3], &[8], 1.0));
    }

    #[test]
    fn corollary_and_lrexp() {
        let f = DecayFunction::polynomial(2.0, 1.0).unwrap();
        let g = InteractionGraph::new(path(12), chain_terms(12, 1.0)).unwrap();
        let cor = theorem_phi_bound(&g, &f, &[2], &[7], 1.0, 1.0, 0.3, PhiForm::Corollary).unwrap();
        let th = theorem_phi_bound(&g, &f, &[2], &[7], 1.0, 1.0, 0.3, PhiForm::Theorem).unwrap();
        assert!(cor > 0.0 && cor >= th);
        let lr = theorem_phi_bound(&g, &f, &[2], &[7], 1.0, 1.0, 0.0, PhiForm::LrExp { nu: 1 }).unwrap();
        assert!((lr - 0.25 * (-5.0f64).exp()).abs() < 1e-16);
        assert!((lrexp_constant(1) - 4.0 * (std::f64::consts::PI.powi(2) / 3.0 - 1.0)).abs() < 1e-12);
        let plain = DecayFunction::polynomial(2.0, 0.0).unwrap();
        assert!(theorem_phi_bound(&g, &plain, &[2], &[7], 1.0, 1.0, 0.0, PhiForm::LrExp { nu: 1 }).is_err());
    }

    #[test]
    fn validation() {
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(InteractionGraph::new(bad, vec![]).is_err());
        let asym = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(InteractionGraph::new(asym, vec![]).is_err());
        let empty_term = InteractionTerm {
            sites: vec![],
            norm: 1.0,
        };
        assert!(InteractionGraph::new(path(2), vec![empty_term]).is_err());
        assert!(DecayFunction::tabulated(vec![(0.0, 1.0), (1.0, 2.0)], 0.0).is_err());
        assert!(DecayFunction::tabulated(vec![(0.0, 1.0), (1.0, 0.0)], 0.0).is_err());
        let tab = DecayFunction::tabulated(vec![(0.0, 1.0), (2.0, 0.5)], 0.0).unwrap();
        assert_eq!(tab.base(1.0), 0.75);
        assert_eq!(tab.base(10.0), 0.5);
        let g = InteractionGraph::new(vec![], vec![]).unwrap();
        assert!(matches!(
            theorem_phi_bound(&g, &tab, &[], &[], 1.0, 1.0, 0.0, PhiForm::Theorem),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
