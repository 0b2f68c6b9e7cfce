//! Numerical laboratory for the volume-preserving mean curvature flow of
//! spherical caps with a line-tension dynamic boundary condition.
//!
//! The crate provides
//! - closed-form stationary-cap algebra ([`cap`]),
//! - the curvilinear chart over a reference cap ([`chart`]),
//! - discrete differential geometry of height-function surfaces ([`surface`]),
//! - the linearized operator, its Fourier-mode eigenproblems, nullspace and
//!   parameter scans ([`stability`]),
//! - explicit time integration of the nonlinear and linearized flows with
//!   conservation and decay diagnostics ([`flow`]),
//! - the `capflow` command line front end ([`cli`]).

pub mod cap;
pub mod chart;
pub mod cli;
pub mod error;
pub mod flow;
pub mod grid;
pub mod report;
pub mod stability;
pub mod surface;

pub use cap::{make_cap, CapParams};
pub use chart::{Chart, CutoffProfile, SurfacePoint};
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use surface::Embedding;
