//! Free Klein-Gordon and Schrödinger fields on a periodic lattice, treated as
//! covariant Hamiltonian systems: exact spectral dynamics, action principles,
//! generalized Darboux charts and the associated Jacobi and Poisson brackets.

pub mod brackets;
pub mod darboux;
pub mod error;
pub mod kg;
pub mod lattice;
pub mod ledger;
pub mod sampling;
pub mod schrodinger;
mod timegrid;

pub use error::{Error, Result};
pub use ledger::SignLedger;
