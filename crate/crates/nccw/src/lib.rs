//! Combinatorial engine for diagonals of one-dimensional NCCW complexes.
//!
//! The crate has four layers:
//!
//! * [`model`] — boundary data of a 1-dimensional NCCW complex (block sizes,
//!   multiplicities, slot layout), validation, and the dual combinatorics
//!   (edge/vertex sets with partial source and target maps, twisted by
//!   block-preserving permutations).
//! * [`classify`] — the decision procedures: reduced form, direct-sum
//!   decomposition, conjugacy of twisted diagonals via graph isomorphism
//!   certificates, permutation-matrix congruence, centre spectra, rigidity
//!   tests, and the counterexample generator separating congruence from
//!   unoriented graph isomorphism.
//! * [`spectrum`] — topological 1-complex models: spectra of diagonals,
//!   connectivity and cut-vertex analysis, homeomorphism, and
//!   `K_{3,3}`-subdivision certificates.
//! * [`tower`] — inductive systems of building blocks: the connectivity and
//!   path modifications, connector maps between consecutive levels, exact
//!   dyadic path lifting, condition checkers, ends trees, bisection
//!   censuses and the distinguishing invariant for tower families.

pub mod dyadic;
pub mod ids;
pub mod perm;

pub mod classify;
pub mod model;
pub mod spectrum;
pub mod tower;

pub use dyadic::{AffineMap, Dyadic};
pub use ids::{CopyId, IIdx, PIdx, XIdx, YIdx};
