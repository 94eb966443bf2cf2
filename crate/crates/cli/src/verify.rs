//! Randomized invariant battery behind `lrlattice verify`.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrlattice::anharmonic::{kappa_v, PerturbationSpec};
use lrlattice::clustering::{clustering_fit, ground_covariance, ClusteringParams};
use lrlattice::focksim::ccr_residual;
use lrlattice::kernels::{
    compute_evolution_kernels, compute_fourier_kernel_with, envelope, kernel_scale, EnvelopeParams, EvalPath, Order,
};
use lrlattice::lightcone::optimal_mu;
use lrlattice::sums::power_sum_zd;
use lrlattice::weyl::{
    commutator_norm, evolve, harmonic_bound_rhs, phase_resolution, symplectic_form, HarmonicBoundParams, HarmonicForm,
};
use lrlattice::{Couplings, TorusLattice, WeylFunction};

use crate::config::Scenario;
use crate::output::{Cell, Table};
use crate::run::Report;
use crate::CliError;

/// One line of the summary table. `margin` is the smallest slack
/// (tolerance or bound minus observed value) over all cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    pub margin: f64,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            violations: 0,
            margin: f64::INFINITY,
        }
    }

    /// Records one case that passes when `slack >= 0`.
    fn record(&mut self, slack: f64) {
        self.cases += 1;
        if !(slack >= 0.0) {
            self.violations += 1;
        }
        self.margin = self.margin.min(slack);
    }

    pub fn passed(&self) -> bool {
        self.cases > 0 && self.violations == 0
    }
}

fn random_setup(rng: &mut ChaCha8Rng) -> lrlattice::Result<(TorusLattice, Couplings)> {
    let nu = rng.random_range(1..=2usize);
    let l = [4usize, 6, 8][rng.random_range(0..3usize)];
    let omega = rng.random_range(0.3..2.0);
    let lambda = (0..nu).map(|_| rng.random_range(0.0..2.0)).collect();
    Ok((TorusLattice::new(nu, l)?, Couplings::new(omega, lambda)?))
}

fn random_function(rng: &mut ChaCha8Rng, lat: &TorusLattice, sites: &[usize]) -> lrlattice::Result<WeylFunction> {
    let pairs: Vec<(usize, Complex64)> = sites
        .iter()
        .map(|&x| {
            (
                x,
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    WeylFunction::new(lat.len(), &pairs)
}

fn distinct_sites(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = Vec::with_capacity(k);
    while v.len() < k.min(n) {
        let x = rng.random_range(0..n);
        if !v.contains(&x) {
            v.push(x);
        }
    }
    v
}

fn max_diff(a: &WeylFunction, b: &WeylFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn checks(cases: usize, seed: u64) -> lrlattice::Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Check::new("kernel_paths_agree");
    let mut env = Check::new("kernel_envelope");
    let mut group = Check::new("weyl_group_law");
    let mut sympl = Check::new("symplectic_conservation");
    let mut dom = Check::new("harmonic_bound_domination");
    for _ in 0..cases {
        let (lat, c) = random_setup(&mut rng)?;
        let t = rng.random_range(0.0..4.0);
        let order = Order::ALL[rng.random_range(0..3usize)];
        let fast = compute_fourier_kernel_with(&lat, &c, order, t, EvalPath::Transform)?;
        let slow = compute_fourier_kernel_with(&lat, &c, order, t, EvalPath::Direct)?;
        let scale = kernel_scale(&c, order);
        let x = rng.random_range(0..lat.len());
        paths.record(1e-10 - (fast.value(x) - slow.value(x)).norm() / scale);
        let mu = [0.5, 1.0, 2.0][rng.random_range(0..3usize)];
        let e = EnvelopeParams::new(mu, c.clone())?;
        let floor = 64.0 * f64::EPSILON * scale;
        env.record(envelope(&e, order, t, lat.norm(x)) + floor - fast.value(x).norm());

        let (sf, sg) = (
            distinct_sites(&mut rng, lat.len(), 3),
            distinct_sites(&mut rng, lat.len(), 3),
        );
        let f = random_function(&mut rng, &lat, &sf)?;
        let g = random_function(&mut rng, &lat, &sg)?;
        let s = rng.random_range(0.0..2.0);
        let ev = |h: &WeylFunction, t: f64| -> lrlattice::Result<WeylFunction> {
            let (h1, h2) = compute_evolution_kernels(&lat, &c, t, false)?;
            evolve(&lat, h, &h1, &h2)
        };
        let composed = ev(&ev(&f, t)?, s)?;
        let direct = ev(&f, s + t)?;
        group.record(1e-9 - max_diff(&composed, &direct) / (1.0 + f.l1_norm()));
        let drift = symplectic_form(&ev(&f, t)?, &ev(&g, t)?)? - symplectic_form(&f, &g)?;
        sympl.record(1e-9 * (1.0 + f.l1_norm() * g.l1_norm()) - drift.abs());

        let xs = distinct_sites(&mut rng, lat.len(), 2);
        let ys: Vec<usize> = distinct_sites(&mut rng, lat.len(), 4)
            .into_iter()
            .filter(|y| !xs.contains(y))
            .collect();
        if ys.is_empty() {
            continue;
        }
        let f = random_function(&mut rng, &lat, &xs)?;
        let g = random_function(&mut rng, &lat, &ys)?;
        let p = HarmonicBoundParams::new(rng.random_range(0.2..3.0), c.clone())?;
        let exact = commutator_norm(&ev(&f, t)?, &g)?;
        let bound = harmonic_bound_rhs(&lat, &f, &g, t, &p, HarmonicForm::Theorem)?;
        dom.record(bound + phase_resolution(&lat, &c, &f, &g, t) - exact);
    }

    let mut mu = Check::new("optimal_mu_root");
    let mu0 = optimal_mu();
    let root = 2.0 / mu0 - (0.5 * mu0 + 1.0).exp();
    mu.record(if mu0 > 0.5 && mu0 < 1.0 {
        1e-9 - root.abs()
    } else {
        -1.0
    });

    let mut kappa = Check::new("gaussian_kappa");
    for alpha in [0.1, 0.5, 2.0] {
        let k = kappa_v(&PerturbationSpec::gaussian(alpha)?)?.value;
        kappa.record(1e-8 - (k - alpha).abs());
    }

    let mut cnu = Check::new("lattice_sum_z");
    let want = 4.0 * (std::f64::consts::PI.powi(2) / 3.0 - 1.0);
    cnu.record(1e-6 - (4.0 * power_sum_zd(1) - want).abs());

    let mut ccr = Check::new("ccr_low_block");
    for (n, w) in [(20, 1.0), (30, 0.5), (40, 2.0)] {
        ccr.record(1e-10 - ccr_residual(n, w));
    }

    let mut clus = Check::new("clustering_domination");
    let lat = TorusLattice::new(1, 32)?;
    let cov = ground_covariance(&lat, &Couplings::isotropic(2.0, 1.0, 1)?)?;
    let fit = clustering_fit(&cov, &ClusteringParams::default(), None)?;
    for (d, corr) in fit.distances.iter().zip(&fit.correlations) {
        if *d as f64 >= fit.xi_theorem {
            clus.record(fit.envelope(*d) + fit.roundoff_floor - corr.norm());
        }
    }

    Ok(vec![paths, env, group, sympl, dom, mu, kappa, cnu, ccr, clus])
}

pub fn run(s: &Scenario, seed: u64) -> Result<Report, CliError> {
    let cases = s.verify.as_ref().map_or(200, |v| v.cases);
    if cases == 0 {
        return Err(CliError::Config("verify: cases must be at least 1".into()));
    }
    let results = checks(cases, seed)?;
    let mut table = Table::new(&["check", "cases", "violations", "margin", "passed"]);
    let mut summary = Vec::new();
    for c in &results {
        table.push(vec![
            Cell::from(c.name),
            c.cases.into(),
            c.violations.into(),
            Cell::Real(c.margin),
            Cell::from(if c.passed() { "pass" } else { "FAIL" }),
        ]);
        summary.push(format!(
            "{:<28} {:>5} cases  {:>3} violations  margin {:.3e}  {}",
            c.name,
            c.cases,
            c.violations,
            c.margin,
            if c.passed() { "pass" } else { "FAIL" }
        ));
    }
    let failed: Vec<&str> = results.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if !failed.is_empty() {
        for line in &summary {
            eprintln!("{line}");
        }
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok(Report {
        table,
        svg: None,
        summary,
    })
}
