//! Cell-centered finite volumes (MPSA/MPFA) for quasi-static Biot poroelasticity.
//!
//! The pipeline is
//! [`mesh`] → [`localop`] (per-vertex condensation and face stencils) →
//! [`assembly`] (global sparse system, direct solve, time stepping) →
//! [`postproc`] (fluxes, tractions, error metrics), with [`mms`] providing
//! the manufactured-solution harness on top.

pub mod assembly;
pub mod dfield;
pub mod error;
pub mod localop;
pub mod mesh;
pub mod mms;
pub mod postproc;
pub mod sparse;

pub use error::{Error, Result};

/// Points and vectors in the plane.
pub type Point = nalgebra::Vector2<f64>;
