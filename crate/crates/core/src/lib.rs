//! Grid-level laboratory for Sobolev spaces `W^{1,p}` on rasterized domains.
//!
//! The crate discretizes bounded open sets of `R^1` and `R^2` on uniform
//! grids and provides:
//!
//! * [`grid_domain`]: rasterized domains, measure, connectivity, rigid-motion
//!   images and congruence tests;
//! * [`field`]: nodal scalar and vector fields, finite-difference gradients,
//!   `L^p` and `W^{1,p}` norms, exponential probes and bump test functions;
//! * [`forms`]: the first and second derivative forms of the `W^{1,p}` norm,
//!   Gateaux-derivative checks, weak p-Laplace residuals and Clarkson checks;
//! * [`operators`]: weighted composition operators `u -> g * (u o xi)`,
//!   defect measurements, probe-based reconstruction of `(g, xi)`, rigid
//!   motion fitting and the congruence pipeline;
//! * [`suites`]: named verification suites used by the `sil` binary.

pub mod error;
pub mod field;
pub mod forms;
pub mod grid_domain;
pub mod io;
pub mod operators;
pub mod sampling;
pub mod suites;

pub use error::{LabError, Result};
pub use field::{Field, VectorField};
pub use grid_domain::{GridDomain, Point, RigidMotion};
