//! Single-site entanglement of one-dimensional Hubbard chains.
//!
//! The crate compares the von Neumann and linear entropies of one site in
//! homogeneous, disordered and superlattice chains. Homogeneous chains use
//! the closed-form FVC energy functional; inhomogeneous chains use a
//! Kohn-Sham local-density pipeline built on the same functional. Small
//! chains can be solved exactly for validation.

pub mod bessel;
pub mod chain;
pub mod ed;
pub mod entropy;
pub mod error;
pub mod experiments;
pub mod fvc;
pub mod kslda;
pub mod linalg;
pub mod quadrature;

pub use chain::{build_potential, impurity_count, Boundary, ChainSpec, PotentialSpec};
pub use entropy::{
    linear, probs_from_density, taylor_entropy, von_neumann, OccupationProbabilities,
};
pub use error::{Error, Result};
pub use fvc::{double_occupancy, e0_fvc, homogeneous_entropies, FvcEvaluation};
