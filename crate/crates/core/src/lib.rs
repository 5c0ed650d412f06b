//! Porous medium flow with drift and source, its incompressible (Hele-Shaw)
//! limit, and numerical diagnostics for the free boundary.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod hele_shaw;
pub mod model;
pub mod pme;

pub use error::{Error, Result};
