//! Adiabatic preparation of topologically ordered ground states on a
//! 12-qubit honeycomb torus, plus the effective-Hamiltonian tooling around it.

pub mod anyon_algebra;
pub mod anyon_chain;
pub mod error;
pub mod evolution;
pub mod experiment;
pub mod levin_wen_probes;
pub mod linalg;
pub mod majorana_chain;
pub mod schrieffer_wolff;
pub mod sparse;
pub mod spin_lattice;

pub use error::{Error, Result};
