//! Spectral Galerkin simulator for the stochastic second-grade fluid on the
//! unit disk with Navier-slip boundary conditions.

pub mod basis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod nonlinear;
pub mod par;
pub mod probes;
pub mod runner;
pub mod sde;
pub mod spaces;
pub mod stokes;
pub mod trial;
pub mod verify;

pub use error::{Error, Result};
