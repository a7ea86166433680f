//! Hard maximum-independent-set instances for Rydberg-blockade adiabatic optimization.
//!
//! The crate builds doublet/gadget unit-disk graphs, their blockade-constrained
//! configuration spaces and reduced enhanced-Rabi chains, the associated sparse
//! Hamiltonians, and the spectral, dynamical and perturbative analyses used to study
//! the closing adiabatic gap and the scar-assisted quench protocol.

pub mod dynamics;
pub mod error;
pub mod graphs;
pub mod hamiltonians;
mod linalg;
pub mod spectral;
pub mod statespace;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{linear_fit, LinearFit};
