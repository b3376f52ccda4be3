//! Optimal control of two-dimensional incompressible Navier-Stokes flows
//! with no-slip or Navier-slip walls, on a staggered grid, with adjoint
//! gradients and a friction-parameter sweep harness.

pub mod adjoint;
pub mod config;
pub mod control;
pub mod error;
pub mod fields;
pub mod forward;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod presets;
pub mod sweep;

pub use error::{Error, Result};
