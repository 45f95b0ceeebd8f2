//! Numerical laboratory for Cramer transforms, half-space depth, and
//! random polytope measure estimation over log-concave measures.
//!
//! The library provides:
//!
//! * measure models (cubes, balls, Gaussians, products of validated
//!   one-dimensional log-concave densities) with reproducible samplers;
//! * logarithmic moment generating functions, exponential tilting, and
//!   Legendre (Cramer) transforms with certified sublevel membership;
//! * half-space depth, exact where the minimizing direction is known and
//!   by deterministic multi-start direction search otherwise;
//! * random polytope sampling with convex-hull membership certificates
//!   and two-level Monte Carlo measure estimation;
//! * concentration diagnostics (moment ratios, variance parameters,
//!   threshold-window bounds) and threshold location sweeps.
//!
//! Estimators consume counter-addressable random streams and fold
//! partial results in fixed order, so every estimate is bit-identical
//! across runs and worker counts.

pub mod analysis;
pub mod closedform;
pub mod depth;
pub mod error;
pub mod interp;
mod lp;
pub mod measures;
pub mod parallel;
pub mod polytope;
pub mod quad;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod threshold;
pub mod transform;

pub use error::{Error, Result};
pub use measures::{Custom1D, MeasureModel};
pub use rng::RngStream;

/// Concrete scalar type used by the laboratory layers.
pub type Real = f64;

/// Crate version string embedded in artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
