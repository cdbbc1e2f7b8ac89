//! Joint phase-spacing optimization for a double-sided reconfigurable
//! intelligent surface (RIS) on a dense half-wavelength grid.
//!
//! The surface is modeled as a graph whose vertices are grid elements and
//! whose edge weights decay with inter-element distance. Each element is
//! encoded on two qubits (activation + phase) of a dense statevector
//! simulator; a layered variational circuit is trained with the
//! parameter-shift rule against a penalized max-min rate loss evaluated on
//! a spacing-dependent Rician channel model with mutual coupling. Classical
//! baselines and an exhaustive oracle provide ground truth at desk scale.

// Index-based loops are kept where both row and column indices of a matrix
// are in play; iterator rewrites obscure the math being transcribed.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod channel;
pub mod circuit;
pub mod error;
pub mod graph;
pub mod harness;
pub mod qsim;
pub mod trainer;

pub use error::{Error, Result};
