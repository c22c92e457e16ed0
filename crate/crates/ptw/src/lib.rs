//! Persistent turning walker toolkit.
//!
//! A planar random walker whose curvature follows an Ornstein-Uhlenbeck
//! process, whose heading integrates the curvature, and whose position
//! integrates the heading direction. The crate provides:
//!
//! - exact sampling of the Gaussian `(κ, θ)` sub-process at any step size
//!   ([`gaussian`], [`sim`]), plus Euler-Maruyama for generalized drifts;
//! - the invariant law and pointwise model functions ([`model`]);
//! - a finite-difference solver for the Poisson equation of the kinetic
//!   generator on the cylinder, with asymptotic variances ([`poisson`]);
//! - the limiting diffusion constant by adaptive quadrature, closed form,
//!   and Green-Kubo integration ([`diffusion`]);
//! - ensemble Monte Carlo experiments with reproducible parallel streams and
//!   the statistical tests that verify the diffusive limit ([`stats`]);
//! - a verification suite ([`acceptance`]) and a thin CLI (`ptw`).
//!
//! See `examples/` for one runnable program per capability.

pub mod acceptance;
pub mod cli;
pub mod diffusion;
pub mod error;
pub mod gaussian;
pub mod model;
pub mod poisson;
pub mod rng;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{PtwError, Result};
pub use model::{FullState, KineticState, ModelParams};
