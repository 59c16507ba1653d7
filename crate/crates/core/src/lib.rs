//! Andersen dynamics, its couplings, and the contraction metrics used to
//! measure how fast two coupled copies come together.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: Euclidean and flat-torus state spaces.
//! - [`potentials`]: potential energies and their analytic constants.
//! - [`flow`]: Hamiltonian flow between velocity randomizations.
//! - [`andersen`]: the single-copy jump process.
//! - [`coupling`]: the coupled process.
//! - [`metrics`]: contraction metrics, rates and conditions.
//! - [`harness`]: replicated experiments, fits and sweeps.

pub mod andersen;
pub mod coupling;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod potentials;
pub mod rng;
pub mod selftest;
pub mod state;

pub use error::{Error, Result};
