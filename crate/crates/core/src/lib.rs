//! Noisy small-qubit circuit simulation and the variational quantum-neural
//! hybrid eigensolver (VQNHE), including retraining-based error mitigation
//! and the transformed-Hamiltonian (tri-optimization) extension.
//!
//! The crate is organised bottom-up:
//!
//! * [`pauli`]: weighted Pauli strings, conjugation by involutory
//!   generators and dense realisation.
//! * [`simulator`]: layered ansatz circuits, statevector and density-matrix
//!   simulation with per-gate noise, seeded sampling.
//! * [`postprocess`]: the classical amplitude module `f(s)`.
//! * [`estimator`]: exact and sample-based energy estimation.
//! * [`training`]: Adam, parameter-shift and analytic gradients, retraining.
//! * [`oracles`]: exact diagonalisation and one-qubit closed forms.
//! * [`experiments`]: config-driven experiment runner and scaling fits.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod hamiltonians;
pub mod oracles;
pub mod pauli;
pub mod postprocess;
pub mod simulator;
pub mod training;

pub use error::{Error, Result};
pub use num_complex::Complex64;
