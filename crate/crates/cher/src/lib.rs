//! Hamiltonian-ensemble methods for pure dephasing dynamics.
//!
//! A pure dephasing channel on an n-level system is fixed by one complex
//! factor per raising operator of su(n). This crate builds the algebraic
//! scaffolding (generators, ladder operators, roots), converts between the
//! factor, superoperator, and process-matrix pictures, retrieves the
//! quasi-distribution over ensemble frequencies by Fourier inversion, and
//! quantifies how far that distribution is from any probability
//! distribution. Two physical front ends are included: an exactly solvable
//! qubit-pair bath model (with a few-mode oracle for cross-checking) and a
//! simulated singlet-triplet qubit tomography experiment.

pub mod dephasing;
pub mod error;
pub mod io;
pub mod lie;
pub mod linalg;
pub mod nonclassicality;
pub mod oracle;
pub mod quad;
pub mod retrieval;
pub mod spin_boson;
pub mod st0;

pub use error::{Error, Result};
