//! Exact computations in the Hamiltonian Lie algebra `H_N` on the N-torus.

pub mod algebra;
pub mod automorphism;
pub mod cli;
pub mod derivations;
pub mod error;
pub mod generation;
pub mod lattice;
pub mod sampling;
pub mod scalar;
pub mod selfcheck;
pub mod symplectic;

pub use error::{Error, Result};
