//! Numerical laboratory for mean-field plus pair-excitation dynamics of
//! weakly interacting bosons.
//!
//! The crate evolves the scaled Hartree equation and the pair-excitation
//! kernel system, assembles the fourth-order forcing sectors with their
//! singular/regular splits, runs the iterated sector cascade, and measures
//! the Fock-space distance between exact and approximate evolutions in a
//! truncated discrete-mode model at small particle number.

pub mod cascade;
pub mod error;
pub mod fit;
pub mod grid;
pub mod kernel;
pub mod meanfield;
pub mod forcing;
pub mod pair;

pub use error::{Error, Result};
pub use grid::{mixed_norm, Field, GridSpec, OuterNorm};
pub use kernel::{DeltaPlus, Kernel};
