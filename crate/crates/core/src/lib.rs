//! Numerical laboratory for a predator-prey system on an interval with a
//! spatially varying resource `m(x)` and predators whose motility `d(u)`
//! falls as prey density `u` rises.
//!
//! Steady states are computed in the variables `(u, w)` with `w = d(u) v`,
//! which turn the cross-diffusion system into
//!
//! ```text
//! εΔu + u(m − u) − F(u) w / d(u) = 0,
//! μΔw + (αF(u) − θ) w / d(u) = 0,
//! ```
//!
//! with homogeneous Neumann ends. Everything is discretized by second-order
//! finite differences on a uniform node-centred grid.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod asymptotics;
pub mod eigen;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod logistic;
pub mod model;
pub mod steady;
pub mod thresholds;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{build_grid, integrate, Grid, ScalarField};
pub use model::{Dispersal, ModelParams, ResourceSpec, Response};
