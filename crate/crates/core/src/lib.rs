//! Velocity-grid realization of the linearized, diffusively heated inelastic
//! Boltzmann operator and of its hydrodynamic spectrum.

pub mod collision;
pub mod config;
pub mod dispersion;
pub mod equilibrium;
pub mod error;
pub mod export;
pub mod linop;
pub mod scenario;
pub mod spectrum;
pub mod velocity_grid;
pub mod verify;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
