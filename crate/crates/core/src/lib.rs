//! Polar decomposition of the Wiener measure on positive paths.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] – uniform grids on `[0, 1]`, sampled paths, Brownian samplers and
//!   the reparametrisation action of diffeomorphisms on paths.
//! * [`diffeo`] – orientation-preserving diffeomorphisms of `[0, 1]` stored in
//!   log-derivative coordinates, the Möbius subfamily and the measure `μ_σ`.
//! * [`polar`] – the radial functional `ρ` and the map between positive paths
//!   and `(ρ, φ)` pairs.
//! * [`schwarzian`] – Schwarzian derivatives, Radon–Nikodym densities of left
//!   translates of `μ_σ`, and an inverse-Schwarzian solver.
//! * [`oracles`] – closed forms and independent quadrature for every scalar
//!   identity used by the estimators.
//! * [`montecarlo`] – importance-sampled and bridge-conditioned estimators and
//!   the two-sided comparisons built from them.
//! * [`planar`] – the complex-valued analogue with four polar coordinates.
//! * [`report`] and [`cli`] – JSON verification reports and the `wpolar`
//!   command line front end.

// `!(x > 0.0)` is used on purpose so NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diffeo;
pub mod error;
pub mod grid;
pub mod interp;
pub mod montecarlo;
pub mod oracles;
pub mod planar;
pub mod polar;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod schwarzian;
pub mod stats;

pub use diffeo::{Diffeo, MobiusDiffeo, Reparam};
pub use error::{Error, Result};
pub use grid::{Dispersion, GridSpec, Path};
pub use polar::PolarPair;
pub use rng::RngStream;
pub use stats::MCEstimate;

