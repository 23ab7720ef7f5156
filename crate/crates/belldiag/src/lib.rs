//! Classification of Bell-diagonal bipartite qudit states.
//!
//! A Bell-diagonal state of two qudits is a probabilistic mixture of the d²
//! maximally entangled Bell basis projectors. The mixing probabilities form a
//! point on a (d²−1)-simplex, which makes the whole family amenable to
//! geometric analysis: entanglement criteria become predicates on a length-d²
//! probability vector.
//!
//! The crate provides
//! - construction of Weyl operators, Bell projectors and Bell-diagonal
//!   density matrices ([`weyl`]),
//! - uniform and lattice samplers over the simplex, the enclosure polytope
//!   and a three-parameter family of qutrit states ([`sampling`]),
//! - the finite group of entanglement-class-conserving coordinate
//!   permutations ([`symmetry`]),
//! - sufficient entanglement criteria E1–E4 ([`criteria`]) and numerically
//!   optimized entanglement witnesses E5 ([`witness`]),
//! - sufficient separability criteria S1 (convex-hull membership against a
//!   store of known separable vertices) and S2 ([`separability`]),
//! - an orchestration layer that classifies states as separable, bound
//!   entangled, free entangled or unknown, and estimates class volumes
//!   ([`pipeline`]).

pub mod criteria;
pub mod error;
pub mod lp;
pub mod mat;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod separability;
pub mod symmetry;
pub mod weyl;
pub mod witness;

pub use error::BellError;
pub use weyl::SimplexCoords;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, BellError>;
