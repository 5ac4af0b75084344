//! Device-independent certification of quantum properties from finite
//! Bell-test data.
//!
//! The crate builds composite null hypotheses as conic feasible sets
//! (local polytope, moment-matrix outer approximations of the quantum set,
//! negativity/fidelity/Bell-value capped sets), projects observed
//! frequencies onto them in Kullback-Leibler divergence, and turns finite
//! trial data into rigorous p-value upper bounds via the martingale and
//! prediction-based-ratio protocols.

extern crate openblas_src;

pub mod conic;
pub mod functionals;
pub mod hypothesis;
pub mod protocols;
pub mod quantum;
pub mod scenario;
pub mod trials;
