//! Numerical checks of entanglement monotones.
//!
//! * [`qcore`]: dense states, local operators, sampling.
//! * [`weakmeas`]: weak-measurement random walks and their exact lattice oracle.
//! * [`monotones`]: monotone catalog and three-qubit invariants.
//! * [`diffcheck`]: finite-difference evaluation of the differential monotonicity conditions.
//! * [`loccsim`]: Monte Carlo trials of concrete local operations.
//! * [`cli`]: command-line front end.

pub mod cli;
pub mod diffcheck;
pub mod error;
pub mod loccsim;
pub mod monotones;
pub mod qcore;
pub mod weakmeas;

pub use error::{MonolabError, Result};
