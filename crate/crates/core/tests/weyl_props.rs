mod common;

use lrlattice::kernels::compute_evolution_kernels;
use lrlattice::weyl::{commutator_linear_bound, commutator_norm, evolve, symplectic_form};
use lrlattice::{Couplings, TorusLattice, WeylFunction};
use num_complex::Complex64;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    nu: usize,
    half_side: usize,
    omega: f64,
    lambda: Vec<f64>,
    f: Vec<(usize, (f64, f64))>,
    g: Vec<(usize, (f64, f64))>,
    s: f64,
    t: f64,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..=2, 1usize..=5).prop_flat_map(|(nu, half_side)| {
        let n = (2 * half_side).pow(nu as u32);
        let entries = proptest::collection::vec((0..n, (-2.0..2.0f64, -2.0..2.0f64)), 1..5);
        (
            0.2..2.0f64,
            proptest::collection::vec(0.1..2.0f64, nu),
            entries.clone(),
            entries,
            -3.0..3.0f64,
            -3.0..3.0f64,
        )
            .prop_map(move |(omega, lambda, f, g, s, t)| Case {
                nu,
                half_side,
                omega,
                lambda,
                f,
                g,
                s,
                t,
            })
    })
}

fn weyl(n: usize, entries: &[(usize, (f64, f64))]) -> WeylFunction {
    let mut seen = Vec::new();
    let list: Vec<(usize, Complex64)> = entries
        .iter()
        .filter(|(x, _)| {
            let fresh = !seen.contains(x);
            seen.push(*x);
            fresh
        })
        .map(|&(x, (re, im))| (x, Complex64::new(re, im)))
        .collect();
    WeylFunction::new(n, &list).unwrap()
}

fn run(lat: &TorusLattice, c: &Couplings, f: &WeylFunction, t: f64) -> WeylFunction {
    let (h1, h2) = compute_evolution_kernels(lat, c, t, !c.is_gapped()).unwrap();
    evolve(lat, f, &h1, &h2).unwrap()
}

fn max_diff(a: &WeylFunction, b: &WeylFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn group_law(c in case()) {
        let lat = TorusLattice::new(c.nu, c.half_side).unwrap();
        let cp = Couplings::new(c.omega, c.lambda.clone()).unwrap();
        let f = weyl(lat.len(), &c.f);
        let two_step = run(&lat, &cp, &run(&lat, &cp, &f, c.s), c.t);
        let one_step = run(&lat, &cp, &f, c.s + c.t);
        prop_assert!(max_diff(&two_step, &one_step) < 1e-9);
    }

    #[test]
    fn symplectic_form_is_conserved(c in case()) {
        let lat = TorusLattice::new(c.nu, c.half_side).unwrap();
        let cp = Couplings::new(c.omega, c.lambda.clone()).unwrap();
        let f = weyl(lat.len(), &c.f);
        let g = weyl(lat.len(), &c.g);
        let before = symplectic_form(&f, &g).unwrap();
        let after = symplectic_form(&run(&lat, &cp, &f, c.t), &run(&lat, &cp, &g, c.t)).unwrap();
        prop_assert!((before - after).abs() < 1e-9);
        prop_assert_eq!(before, -symplectic_form(&g, &f).unwrap());
    }

    #[test]
    fn matches_mode_space_evolution(c in case(), massless in any::<bool>()) {
        let lat = TorusLattice::new(c.nu, c.half_side).unwrap();
        let omega = if massless { 0.0 } else { c.omega };
        let cp = Couplings::new(omega, c.lambda.clone()).unwrap();
        let f = weyl(lat.len(), &c.f);
        let ours = run(&lat, &cp, &f, c.t);
        let oracle = common::mode_space_evolve(&lat, omega, &c.lambda, f.values(), c.t);
        let err = ours
            .values()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        prop_assert!(err < 1e-10 * (1.0 + c.t.abs()) * f.l1_norm(), "err {err}");
    }

    #[test]
    fn commutator_norm_bounds(c in case()) {
        let lat = TorusLattice::new(c.nu, c.half_side).unwrap();
        let cp = Couplings::new(c.omega, c.lambda.clone()).unwrap();
        let f_t = run(&lat, &cp, &weyl(lat.len(), &c.f), c.t);
        let g = weyl(lat.len(), &c.g);
        let norm = commutator_norm(&f_t, &g).unwrap();
        prop_assert!(norm <= 2.0);
        prop_assert!(norm <= commutator_linear_bound(&f_t, &g).unwrap() + 1e-15);
    }
}

#[test]
fn reference_mode_space_case() {
    let lat = TorusLattice::new(1, 8).unwrap();
    let cp = Couplings::isotropic(1.0, 1.0, 1).unwrap();
    let f = WeylFunction::delta(lat.len(), lat.origin(), Complex64::new(1.0, 0.0)).unwrap();
    let ours = run(&lat, &cp, &f, 0.3);
    let oracle = common::mode_space_evolve(&lat, 1.0, &[1.0], f.values(), 0.3);
    for (a, b) in ours.values().iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-12);
    }
    // the k = 0 component: Σ_x a_t = cos(2ωt), Σ_x b_t = sin(2ωt)/ω
    let total: Complex64 = ours.values().iter().sum();
    assert!((total.re - 0.6f64.cos()).abs() < 1e-12);
    assert!((total.im - 0.6f64.sin()).abs() < 1e-12);
}
