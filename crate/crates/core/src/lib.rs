//! Confidence-region quantum state tomography.
//!
//! The crate turns a measurement record (a POVM and observed counts) into
//! likelihood-based confidence regions, maximum-likelihood estimates, and,
//! for qubits, harmonic expansions of the induced distribution on states.

pub mod combinatorics;
pub mod error;
pub mod hilbert;
pub mod likelihood;
pub mod mle;
pub mod moments;
pub mod simulator;
pub mod wire;
pub mod region;
pub(crate) mod util;

pub use error::{Result, TomoError};
