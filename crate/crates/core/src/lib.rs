//! Exact-diagonalization laboratory for work extraction in the disordered
//! XXZ chain.
//!
//! The crate builds the zero-magnetization sector of the Heisenberg XXZ model
//! with random on-site fields, propagates an initial product (or singlet-chain)
//! state exactly, and at every sample time evaluates entanglement entropies,
//! the imbalance and a family of work-extraction functionals on a two-spin
//! block at the edge of the chain: global, subsystem, switch-off and local
//! ergotropy, the latter as a certified lower bound found by Bayesian search
//! over local unitaries. Disorder ensembles are run in parallel with
//! reproducible per-realization random streams and summarized into time
//! series whose logarithmic slopes classify the dynamical phase.

pub mod ensemble;
pub mod ergotropy;
pub mod error;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod optimizer;
pub mod propagator;

pub use error::{Error, Result};

/// Complex amplitude type used throughout.
pub type C64 = num_complex::Complex64;
