//! Stationary states of the one-dimensional Gross-Pitaevskii equation with a
//! harmonic trap in the Thomas-Fermi limit `ε → 0`: ground states, dark
//! soliton excited states, equilibrium soliton positions, linearized
//! spectra, and rate verification over ε-sweeps.

pub mod analysis;
pub mod ansatz;
pub mod equilibrium;
pub mod error;
pub mod gpe;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod spectrum;
mod newton;

pub use newton::observed_order;
