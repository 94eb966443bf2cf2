//! Scenario files: TOML with a schema version and strict field checking.

use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use lrlattice::anharmonic::{PerturbationSpec, Placement, PotentialProfile, Variable};
use lrlattice::focksim::{Boundary, SmallLattice};
use lrlattice::{Couplings, TorusLattice, WeylFunction};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Harmonic,
    Anharmonic,
    Genbound,
    Focksim,
    Clustering,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub model: Model,
    pub seed: Option<u64>,
    pub lattice: LatticeSpec,
    pub couplings: CouplingSpec,
    #[serde(default)]
    pub bounds: BoundSpec,
    pub observables: Option<ObservableSpec>,
    pub time: Option<TimeGrid>,
    pub perturbation: Option<PerturbationConfig>,
    pub focksim: Option<FockSpec>,
    pub lightcone: Option<LightconeSpec>,
    pub genbound: Option<GenboundSpec>,
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    #[default]
    Periodic,
    Open,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(default = "one")]
    pub nu: usize,
    /// torus half side `L`
    pub half_side: Option<usize>,
    /// site count of a focksim chain or ring
    pub sites: Option<usize>,
    #[serde(default)]
    pub boundary: BoundaryKind,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub omega: f64,
    /// one value per axis, or a single value for all axes
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    #[serde(default = "unit")]
    pub mu: f64,
    #[serde(default = "unit")]
    pub epsilon: f64,
    #[serde(default = "half")]
    pub a: f64,
}

fn unit() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl Default for BoundSpec {
    fn default() -> Self {
        Self {
            mu: 1.0,
            epsilon: 1.0,
            a: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub site: Vec<i64>,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl Entry {
    pub fn amplitude(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub f: Vec<Entry>,
    pub g: Vec<Entry>,
    /// when present, `g` is translated by each of these along the first axis
    pub shifts: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default)]
    pub start: f64,
    pub stop: Option<f64>,
    /// number of intervals; the grid has `steps + 1` points
    pub steps: Option<usize>,
    /// explicit grid, instead of `stop`/`steps`
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Zero,
    Gaussian,
    Cosine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub profile: ProfileKind,
    pub alpha: Option<f64>,
    pub amplitude: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub placement: PlacementKind,
    #[serde(default)]
    pub variable: VariableKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlacementKind {
    #[default]
    Site,
    Bond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    #[default]
    Position,
    Momentum,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockSpec {
    pub trunc: usize,
    #[serde(default = "one")]
    pub probe_occupation: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightconeSpec {
    pub thresholds: Vec<f64>,
    /// largest distance sampled; defaults to `L - 1`
    pub max_distance: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenboundSpec {
    /// strength `J` of the pair terms `Φ({x,y}) = J (1 + d)^{-exponent}`
    pub coupling: f64,
    /// pair terms up to this distance
    pub range: usize,
    pub exponent: f64,
    #[serde(default = "unit")]
    pub norm_a: f64,
    #[serde(default = "unit")]
    pub norm_b: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_cases")]
    pub cases: usize,
}

fn default_cases() -> usize {
    200
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<String>,
    pub svg: Option<String>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let s: Scenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    if s.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            s.schema_version
        )));
    }
    if let Some(t) = &s.time {
        t.grid()?;
    }
    Ok(s)
}

impl TimeGrid {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, self.stop, self.steps) {
            (Some(v), None, None) => v.clone(),
            (None, Some(stop), Some(steps)) if steps > 0 => (0..=steps)
                .map(|i| self.start + (stop - self.start) * i as f64 / steps as f64)
                .collect(),
            _ => return Err(bad("time: give either `values` or `stop` with `steps >= 1`")),
        };
        if grid.is_empty() || grid.iter().any(|t| !t.is_finite()) {
            return Err(bad("time: grid must be nonempty and finite"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("time: grid must be strictly increasing"));
        }
        Ok(grid)
    }
}

impl Scenario {
    pub fn times(&self) -> Result<Vec<f64>, CliError> {
        self.time.as_ref().ok_or_else(|| bad("missing [time] section"))?.grid()
    }

    pub fn couplings(&self) -> Result<Couplings, CliError> {
        let nu = self.lattice.nu;
        let lambda = match self.couplings.lambda.as_slice() {
            [l] => vec![*l; nu],
            ls if ls.len() == nu => ls.to_vec(),
            ls => return Err(bad(format!("couplings: {} lambda values for nu = {nu}", ls.len()))),
        };
        Ok(Couplings::new(self.couplings.omega, lambda)?)
    }

    pub fn torus(&self) -> Result<TorusLattice, CliError> {
        let l = self
            .lattice
            .half_side
            .ok_or_else(|| bad("lattice: half_side is required for this model"))?;
        if self.lattice.boundary != BoundaryKind::Periodic {
            return Err(bad("lattice: the torus models are periodic"));
        }
        Ok(TorusLattice::new(self.lattice.nu, l)?)
    }

    pub fn small_lattice(&self) -> Result<SmallLattice, CliError> {
        let n = self
            .lattice
            .sites
            .ok_or_else(|| bad("lattice: sites is required for focksim"))?;
        if self.lattice.nu != 1 {
            return Err(bad("lattice: focksim chains and rings have nu = 1"));
        }
        let boundary = match self.lattice.boundary {
            BoundaryKind::Periodic => Boundary::Periodic,
            BoundaryKind::Open => Boundary::Open,
        };
        Ok(SmallLattice::new(n, boundary)?)
    }

    pub fn observables(&self) -> Result<&ObservableSpec, CliError> {
        self.observables
            .as_ref()
            .ok_or_else(|| bad("missing [observables] section"))
    }

    pub fn perturbation(&self) -> Result<Option<PerturbationSpec>, CliError> {
        let Some(p) = &self.perturbation else {
            return Ok(None);
        };
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| bad(format!("perturbation: `{name}` is required for this profile")))
        };
        let profile = match p.profile {
            ProfileKind::Zero => PotentialProfile::Zero,
            ProfileKind::Gaussian => PotentialProfile::Gaussian {
                alpha: need(p.alpha, "alpha")?,
            },
            ProfileKind::Cosine => PotentialProfile::Cosine {
                amplitude: need(p.amplitude, "amplitude")?,
                beta: need(p.beta, "beta")?,
            },
        };
        let placement = match p.placement {
            PlacementKind::Site => Placement::Site,
            PlacementKind::Bond => Placement::Bond,
        };
        let variable = match p.variable {
            VariableKind::Position => Variable::Position,
            VariableKind::Momentum => Variable::Momentum,
        };
        Ok(Some(PerturbationSpec::new(profile)?.placed(placement, variable)))
    }
}

/// Resolves entries on a torus, translating every coordinate by `shift` along axis 0.
pub fn torus_function(lat: &TorusLattice, entries: &[Entry], shift: i64) -> Result<WeylFunction, CliError> {
    let mut pairs = Vec::with_capacity(entries.len());
    for e in entries {
        if e.site.len() != lat.nu() {
            return Err(bad(format!("site {:?} does not have {} coordinates", e.site, lat.nu())));
        }
        let mut c = e.site.clone();
        c[0] += shift;
        // out-of-range coordinates are rejected rather than wrapped
        pairs.push((lat.index_of(&c)?, e.amplitude()));
    }
    Ok(WeylFunction::new(lat.len(), &pairs)?)
}

pub fn chain_function(n_sites: usize, entries: &[Entry]) -> Result<WeylFunction, CliError> {
    let mut pairs = Vec::with_capacity(entries.len());
    for e in entries {
        match e.site.as_slice() {
            [x] if *x >= 0 => pairs.push((*x as usize, e.amplitude())),
            other => return Err(bad(format!("focksim site {other:?} must be a single index"))),
        }
    }
    Ok(WeylFunction::new(n_sites, &pairs)?)
}
