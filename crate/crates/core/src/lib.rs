//! Numerical laboratory for corner dynamics of 2D Euler vortex patches.

pub mod angular_model;
pub mod bounds_lab;
pub mod diagnostics;
pub mod effective_ode;
pub mod error;
pub mod euler_patch;
pub mod geometry;
mod ode;
pub mod quadrature;
pub mod table;

pub use error::{Error, Result};
