//! Spectral simulation and identity verification for bounded and
//! quasiperiodic solutions of the KdV and Airy equations.

pub mod almostper;
pub mod error;
pub mod exec;
pub mod greens;
pub mod io;
pub mod kdv;
pub mod lattice;
pub mod quad;
pub mod smoothing;
pub mod waves;

pub use error::{Error, Result};
pub use lattice::{CoefficientField, FrequencyBasis, FrequencyIndex};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
