//! Determinantal processes on C4-free bi-regular bipartite incidence
//! structures, the branching-process limit tree they converge to locally, and
//! the tooling to check that convergence numerically.
//!
//! The crate is organised bottom-up:
//!
//! * [`incidence`] builds and validates the signed incidence structures.
//! * [`spectral`] diagonalises `BᵀB/d` (or its dual `BBᵀ/d`).
//! * [`dpp`] samples, evaluates and conditions projection determinantal
//!   measures.
//! * [`rootedtrees`] holds rooted bipartite trees, canonical codes,
//!   automorphism and matching counts.
//! * [`limit`] computes the law of balls in the limit tree and samples it.
//! * [`experiments`] extracts balls from samples and compares laws.

pub mod dpp;
pub mod error;
pub mod experiments;
pub mod incidence;
pub mod limit;
pub mod rng;
pub mod rootedtrees;
pub mod spectral;

pub use error::{Error, Result};
