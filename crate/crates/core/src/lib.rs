//! Harmonic-lattice Weyl dynamics, Lieb-Robinson bound evaluators, and the
//! brute-force and Gaussian oracles used to check them.

pub mod anharmonic;
pub mod clustering;
pub mod error;
pub mod focksim;
pub mod genbounds;
pub mod kernels;
pub mod lightcone;
pub mod quad;
pub mod sums;
pub mod torus;
pub mod weyl;

pub use error::{Error, Result};
pub use torus::{Couplings, SiteMetric, TorusLattice};
pub use weyl::WeylFunction;
