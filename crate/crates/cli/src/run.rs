//! Pipelines behind each subcommand.

use num_complex::Complex64;
use rayon::prelude::*;

use lrlattice::anharmonic::{
    anharm_bound_rhs, anharm_constants, kappa_v, AnharmonicBoundParams, AnharmonicForm, CnuDomain,
};
use lrlattice::clustering::{clustering_fit, ground_covariance, ClusteringParams};
use lrlattice::focksim::{gated_front, harmonic_reference};
use lrlattice::genbounds::{
    decay_constants, interaction_norm, phi_boundary_and_d, theorem_phi_bound, DecayFunction, InteractionGraph,
    InteractionTerm, PhiForm,
};
use lrlattice::kernels::{compute_evolution_kernels, compute_fourier_kernel, Order};
use lrlattice::lightcone::{axis_series, extract_front, mu_star, velocity_spread};
use lrlattice::weyl::{commutator_norm, evolve, harmonic_bound_rhs, set_distance, HarmonicBoundParams, HarmonicForm};
use lrlattice::{SiteMetric, TorusLattice, WeylFunction};

use crate::config::{self, chain_function, torus_function, Model, Scenario};
use crate::output::{render_svg, write_csv, write_svg, Cell, Series, Table};
use crate::{Cli, CliError, Command};

/// Result of one pipeline before it is written out.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub svg: Option<String>,
    pub summary: Vec<String>,
}

pub fn execute(cli: &Cli) -> Result<Vec<String>, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let scenario = config::load(path)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_scenario(cli.command, &scenario, cli.seed))?;

    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io(format!("{}: {e}", cli.out.display())))?;
    let csv_name = scenario
        .output
        .csv
        .clone()
        .unwrap_or_else(|| format!("{}.csv", cli.command.name()));
    let csv_path = cli.out.join(csv_name);
    write_csv(&csv_path, &report.table)?;
    let mut summary = report.summary;
    summary.push(format!("wrote {}", csv_path.display()));
    if let (Some(name), Some(svg)) = (&scenario.output.svg, &report.svg) {
        let p = cli.out.join(name);
        write_svg(&p, svg)?;
        summary.push(format!("wrote {}", p.display()));
    }
    Ok(summary)
}

fn expect_model(command: Command, s: &Scenario) -> Result<(), CliError> {
    let ok = match command {
        Command::Kernels | Command::Evolve | Command::Commutator | Command::Lightcone => s.model == Model::Harmonic,
        Command::Anharm => s.model == Model::Anharmonic,
        Command::Genbound => s.model == Model::Genbound,
        Command::Focksim => s.model == Model::Focksim,
        Command::Clustering => s.model == Model::Clustering,
        Command::Verify => true,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "subcommand `{}` cannot run a `{:?}` scenario",
            command.name(),
            s.model
        )))
    }
}

pub fn run_scenario(command: Command, s: &Scenario, seed: Option<u64>) -> Result<Report, CliError> {
    expect_model(command, s)?;
    match command {
        Command::Kernels => kernels(s),
        Command::Evolve => evolve_f(s),
        Command::Commutator => commutator(s),
        Command::Lightcone => lightcone(s),
        Command::Genbound => genbound(s),
        Command::Anharm => anharm(s),
        Command::Focksim => focksim(s),
        Command::Clustering => clustering(s),
        Command::Verify => crate::verify::run(s, seed.or(s.seed).unwrap_or(0)),
    }
}

fn real(v: f64) -> Cell {
    Cell::Real(v)
}

fn kernels(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let gapped = c.is_gapped();
    let mut header = vec!["t", "site", "r", "H0", "H1"];
    if gapped {
        header.push("Hm1");
    }
    let blocks = times
        .par_iter()
        .map(|&t| {
            let mut orders = vec![Order::Unit, Order::Gamma];
            if gapped {
                orders.push(Order::Inverse);
            }
            orders
                .into_iter()
                .map(|o| compute_fourier_kernel(&lat, &c, o, t))
                .collect::<lrlattice::Result<Vec<_>>>()
        })
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let mut table = Table::new(&header);
    for (t, fields) in times.iter().zip(&blocks) {
        for x in 0..lat.len() {
            let mut row = vec![real(*t), x.into(), lat.norm(x).into()];
            row.extend(fields.iter().map(|k| real(k.value(x).re)));
            table.push(row);
        }
    }
    let summary = vec![format!(
        "kernels on {} sites at {} times{}",
        lat.len(),
        times.len(),
        if gapped { "" } else { " (omega = 0: H-1 omitted)" }
    )];
    Ok(Report {
        table,
        svg: None,
        summary,
    })
}

fn evolved(lat: &TorusLattice, c: &lrlattice::Couplings, f: &WeylFunction, t: f64) -> lrlattice::Result<WeylFunction> {
    let (h1, h2) = compute_evolution_kernels(lat, c, t, !c.is_gapped())?;
    evolve(lat, f, &h1, &h2)
}

fn evolve_f(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let f = torus_function(&lat, &s.observables()?.f, 0)?;
    let fts = times
        .par_iter()
        .map(|&t| evolved(&lat, &c, &f, t))
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let mut table = Table::new(&["t", "site", "r", "re", "im"]);
    for (t, ft) in times.iter().zip(&fts) {
        for x in 0..lat.len() {
            let v = ft.value(x);
            table.push(vec![real(*t), x.into(), lat.norm(x).into(), real(v.re), real(v.im)]);
        }
    }
    Ok(Report {
        table,
        svg: None,
        summary: vec![format!("evolved f on {} sites at {} times", lat.len(), times.len())],
    })
}

/// `g` translated by each configured shift (or just `g`).
fn targets(s: &Scenario, lat: &TorusLattice) -> Result<Vec<WeylFunction>, CliError> {
    let obs = s.observables()?;
    let shifts = obs.shifts.clone().unwrap_or_else(|| vec![0]);
    shifts.iter().map(|&k| torus_function(lat, &obs.g, k)).collect()
}

/// Up to four snapshot times, spread over the grid and skipping `t = 0`.
fn snapshots(times: &[f64]) -> Vec<usize> {
    let nonzero: Vec<usize> = (0..times.len()).filter(|&i| times[i] != 0.0).collect();
    if nonzero.len() <= 4 {
        return nonzero;
    }
    let mut idx: Vec<usize> = (1..=4).map(|k| nonzero[k * (nonzero.len() - 1) / 4]).collect();
    idx.dedup();
    idx
}

/// Log-scale value-vs-distance snapshots with one envelope per snapshot.
fn distance_plot(title: &str, times: &[f64], dist: &[usize], values: &[Vec<f64>], bounds: &[Vec<f64>]) -> String {
    let take = |m: &[Vec<f64>], i: usize, what: &str| Series {
        label: format!("{what} t = {}", times[i]),
        points: dist.iter().zip(m).map(|(&r, row)| (r as f64, row[i])).collect(),
    };
    let idx = snapshots(times);
    let data: Vec<Series> = idx.iter().map(|&i| take(values, i, "exact")).collect();
    let env: Vec<Series> = idx.iter().map(|&i| take(bounds, i, "bound")).collect();
    render_svg(title, "distance", "commutator norm", &data, &env)
}

fn commutator(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let f = torus_function(&lat, &s.observables()?.f, 0)?;
    let gs = targets(s, &lat)?;
    let p = HarmonicBoundParams::new(s.bounds.mu, c.clone())?.with_a(s.bounds.a)?;
    // rows[t][g] = (exact, theorem, corollary)
    let rows = times
        .par_iter()
        .map(|&t| {
            let ft = evolved(&lat, &c, &f, t)?;
            gs.iter()
                .map(|g| {
                    Ok((
                        commutator_norm(&ft, g)?,
                        harmonic_bound_rhs(&lat, &f, g, t, &p, HarmonicForm::Theorem)?,
                        harmonic_bound_rhs(&lat, &f, g, t, &p, HarmonicForm::Corollary)?,
                    ))
                })
                .collect::<lrlattice::Result<Vec<_>>>()
        })
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let dist: Vec<usize> = gs
        .iter()
        .map(|g| set_distance(&lat, f.support(), g.support()).unwrap_or(0))
        .collect();
    let mut table = Table::new(&["t", "r", "exact_norm", "bound_theorem", "bound_corollary"]);
    let mut violations = 0;
    for (t, row) in times.iter().zip(&rows) {
        for (r, (e, th, co)) in dist.iter().zip(row) {
            if e > th {
                violations += 1;
            }
            table.push(vec![real(*t), (*r).into(), real(*e), real(*th), real(*co)]);
        }
    }
    let exact: Vec<Vec<f64>> = (0..gs.len()).map(|j| rows.iter().map(|r| r[j].0).collect()).collect();
    let bound: Vec<Vec<f64>> = (0..gs.len()).map(|j| rows.iter().map(|r| r[j].1).collect()).collect();
    let svg = distance_plot("harmonic commutator norm", &times, &dist, &exact, &bound);
    Ok(Report {
        table,
        svg: Some(svg),
        summary: vec![format!(
            "{} rows; velocity v_h(mu) = {:.6}; theorem bound exceeded at {violations} rows before roundoff allowance",
            times.len() * gs.len(),
            p.velocity()
        )],
    })
}

fn first_amplitude(entries: &[config::Entry], default: Complex64) -> Complex64 {
    entries.first().map_or(default, |e| e.amplitude())
}

fn lightcone(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let spec = s
        .lightcone
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [lightcone] section".into()))?;
    let (amp_f, amp_g) = match &s.observables {
        Some(o) => (
            first_amplitude(&o.f, Complex64::new(1.0, 0.0)),
            first_amplitude(&o.g, Complex64::new(0.0, 1.0)),
        ),
        None => (Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)),
    };
    let max_d = spec.max_distance.unwrap_or(lat.half_side() - 1);
    let distances: Vec<usize> = (0..=max_d).collect();
    // the time sweep is independent per time, so split it across workers
    let chunks: Vec<Vec<f64>> = times
        .chunks(times.len().div_ceil(rayon::current_num_threads()).max(1))
        .map(|c| c.to_vec())
        .collect();
    let parts = chunks
        .par_iter()
        .map(|ts| axis_series(&lat, &c, amp_f, amp_g, &distances, ts))
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let mut values = vec![Vec::with_capacity(times.len()); distances.len()];
    for part in &parts {
        for (row, v) in values.iter_mut().zip(&part.values) {
            row.extend_from_slice(v);
        }
    }
    let series = lrlattice::lightcone::CommutatorSeries::new(times.clone(), distances.clone(), values)?;
    let rate = mu_star(&c);
    let mut table = Table::new(&["threshold", "r", "t_arrival"]);
    let mut summary = vec![format!(
        "mu0 = {:.12}; v_h(mu0) = {:.6}; 4c = {:.6}",
        rate.mu0,
        rate.velocity,
        4.0 * c.c_max()
    )];
    let mut fronts = Vec::new();
    for &theta in &spec.thresholds {
        let front = extract_front(&series, theta)?;
        for &(r, t) in &front.arrivals {
            table.push(vec![real(theta), r.into(), real(t)]);
        }
        summary.push(match front.fitted_velocity {
            Some(v) => format!(
                "theta = {theta:e}: fitted velocity {v:.6} (residual {:.3e}), monotone = {}, unreached {:?}",
                front.fit_residual,
                front.is_monotone(),
                front.unreached
            ),
            None => format!("theta = {theta:e}: too few arrivals to fit"),
        });
        fronts.push(front);
    }
    if let Some(spread) = velocity_spread(&fronts) {
        summary.push(format!("velocity spread (max-min)/mean = {spread:.4}"));
    }
    let p = HarmonicBoundParams::new(s.bounds.mu, c.clone())?;
    let f = WeylFunction::delta(lat.len(), lat.origin(), amp_f)?;
    let bounds = distances
        .iter()
        .map(|&r| {
            let g = WeylFunction::delta(lat.len(), lat.axis_site(r), amp_g)?;
            times
                .iter()
                .map(|&t| harmonic_bound_rhs(&lat, &f, &g, t, &p, HarmonicForm::Theorem))
                .collect::<lrlattice::Result<Vec<_>>>()
        })
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let svg = distance_plot("commutator front", &times, &distances, &series.values, &bounds);
    Ok(Report {
        table,
        svg: Some(svg),
        summary,
    })
}

fn genbound(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let times = s.times()?;
    let spec = s
        .genbound
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [genbound] section".into()))?;
    let obs = s.observables()?;
    let xs = torus_function(&lat, &obs.f, 0)?.support().to_vec();
    let ys = torus_function(&lat, &obs.g, 0)?.support().to_vec();
    let mut terms = Vec::new();
    for x in 0..lat.len() {
        for y in x + 1..lat.len() {
            let d = lat.distance(x, y);
            if d <= spec.range {
                terms.push(InteractionTerm {
                    sites: vec![x, y],
                    norm: spec.coupling * (1.0 + d as f64).powf(-spec.exponent),
                });
            }
        }
    }
    let graph = InteractionGraph::from_metric(&lat, terms)?;
    let decay = DecayFunction::polynomial(spec.exponent, s.bounds.a)?;
    let k = decay_constants(&graph, &decay)?;
    let phi = interaction_norm(&graph, &decay);
    let pb = phi_boundary_and_d(&graph, &decay, &xs, &ys)?;
    let lrexp = s.bounds.a > 0.0;
    let mut header = vec!["t", "d", "bound_theorem", "bound_corollary"];
    if lrexp {
        header.push("bound_lrexp");
    }
    let dxy = graph.set_distance(&xs, &ys).unwrap_or(0.0);
    let rows = times
        .par_iter()
        .map(|&t| {
            let b = |form| theorem_phi_bound(&graph, &decay, &xs, &ys, spec.norm_a, spec.norm_b, t, form);
            let mut row = vec![b(PhiForm::Theorem)?, b(PhiForm::Corollary)?];
            if lrexp {
                row.push(b(PhiForm::LrExp { nu: lat.nu() })?);
            }
            Ok(row)
        })
        .collect::<lrlattice::Result<Vec<_>>>()?;
    let mut table = Table::new(&header);
    for (t, row) in times.iter().zip(rows) {
        let mut cells = vec![real(*t), real(dxy)];
        cells.extend(row.into_iter().map(real));
        table.push(cells);
    }
    Ok(Report {
        table,
        svg: None,
        summary: vec![format!(
            "||F|| = {:.6e}; C_a = {:.6e}; ||Phi||_a = {:.6e}; |dX| = {}, |dY| = {}, D_a = {:.6e}",
            k.norm_f,
            k.c_a,
            phi,
            pb.boundary_x.len(),
            pb.boundary_y.len(),
            pb.d_a
        )],
    })
}

fn anharm(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let p = s
        .perturbation()?
        .ok_or_else(|| CliError::Config("missing [perturbation] section".into()))?;
    let b = AnharmonicBoundParams::new(s.bounds.mu, s.bounds.epsilon, c, CnuDomain::Torus(lat.clone()))?;
    let kappa = kappa_v(&p)?;
    let k = anharm_constants(&b, kappa.value)?;
    let f = torus_function(&lat, &s.observables()?.f, 0)?;
    let gs = targets(s, &lat)?;
    let mut table = Table::new(&["t", "r", "bound_theorem", "bound_corollary"]);
    for &t in &times {
        for g in &gs {
            let r = set_distance(&lat, f.support(), g.support()).unwrap_or(0);
            table.push(vec![
                real(t),
                r.into(),
                real(anharm_bound_rhs(
                    &lat,
                    &f,
                    g,
                    t,
                    &b,
                    kappa.value,
                    AnharmonicForm::Theorem,
                )?),
                real(anharm_bound_rhs(
                    &lat,
                    &f,
                    g,
                    t,
                    &b,
                    kappa.value,
                    AnharmonicForm::Corollary,
                )?),
            ]);
        }
    }
    Ok(Report {
        table,
        svg: None,
        summary: vec![format!(
            "kappa_V = {:.10e} (+- {:.1e}); C = {:.6e}; C_nu = {:.6e}; v = {:.6e}",
            kappa.value, kappa.error_estimate, k.c, k.c_nu, k.v
        )],
    })
}

fn focksim(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.small_lattice()?;
    let c = s.couplings()?;
    let times = s.times()?;
    let spec = s
        .focksim
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [focksim] section".into()))?;
    let obs = s.observables()?;
    let f = chain_function(lat.len(), &obs.f)?;
    let g = chain_function(lat.len(), &obs.g)?;
    let pert = s.perturbation()?.filter(|p| !p.is_zero());
    let front = gated_front(
        lat,
        spec.trunc,
        &c,
        pert.as_ref(),
        &f,
        &g,
        &times,
        spec.probe_occupation,
    )?;
    let r = set_distance(&lat, f.support(), g.support()).unwrap_or(0);
    let bound = |t: f64| -> Result<f64, CliError> {
        Ok(match &pert {
            Some(p) => {
                let b = AnharmonicBoundParams::new(s.bounds.mu, s.bounds.epsilon, c.clone(), CnuDomain::Zd)?;
                anharm_bound_rhs(&lat, &f, &g, t, &b, kappa_v(p)?.value, AnharmonicForm::Theorem)?
            }
            None => {
                let p = HarmonicBoundParams::new(s.bounds.mu, c.clone())?;
                harmonic_bound_rhs(&lat, &f, &g, t, &p, HarmonicForm::Theorem)?
            }
        })
    };
    let mut table = Table::new(&["t", "r", "exact_norm", "refined_norm", "harmonic_norm", "bound_theorem"]);
    for (i, &t) in times.iter().enumerate() {
        table.push(vec![
            real(t),
            r.into(),
            real(front.values[i]),
            real(front.refined[i]),
            real(harmonic_reference(&lat, &c, &f, &g, t)?),
            real(bound(t)?),
        ]);
    }
    Ok(Report {
        table,
        svg: None,
        summary: vec![format!(
            "n = {} vs n + 4: largest change {:.3e}; reported truncation tolerance {:.3e}",
            front.trunc,
            front.change,
            front.tolerance()
        )],
    })
}

fn clustering(s: &Scenario) -> Result<Report, CliError> {
    let lat = s.torus()?;
    let c = s.couplings()?;
    let cov = ground_covariance(&lat, &c)?;
    let mut params = ClusteringParams {
        mu: s.bounds.mu,
        epsilon: s.bounds.epsilon,
        ..Default::default()
    };
    if let Some(o) = &s.observables {
        params.amp_f = first_amplitude(&o.f, params.amp_f);
        params.amp_g = first_amplitude(&o.g, params.amp_g);
    }
    let pert = s.perturbation()?;
    let fit = clustering_fit(&cov, &params, pert.as_ref())?;
    let mut table = Table::new(&["d", "corr_re", "corr_im", "abs_corr", "envelope"]);
    for (d, corr) in fit.distances.iter().zip(&fit.correlations) {
        table.push(vec![
            (*d).into(),
            real(corr.re),
            real(corr.im),
            real(corr.norm()),
            real(fit.envelope(*d)),
        ]);
    }
    let data = [Series {
        label: "|correlation|".into(),
        points: fit
            .distances
            .iter()
            .zip(&fit.correlations)
            .map(|(&d, c)| (d as f64, c.norm()))
            .collect(),
    }];
    let env = [Series {
        label: "C_fit exp(-d/xi)".into(),
        points: fit.distances.iter().map(|&d| (d as f64, fit.envelope(d))).collect(),
    }];
    let svg = render_svg(
        "ground-state Weyl correlations",
        "distance",
        "|correlation|",
        &data,
        &env,
    );
    let fitted = fit.fitted_xi.map_or("none".to_string(), |x| format!("{x:.6}"));
    Ok(Report {
        table,
        svg: Some(svg),
        summary: vec![format!(
            "xi_theorem = {:.6}; fitted xi = {fitted}; C_fit = {:.6e}; dominated for d >= xi: {}{}",
            fit.xi_theorem,
            fit.c_fit,
            fit.dominated,
            if fit.absolute_fit { " (fit on |corr|)" } else { "" }
        )],
    })
}
