//! Maximal-entropy quantum state tomography.
//!
//! An unknown pure state is reconstructed from the expectation values of an
//! informationally complete operator set. The reconstruction is the Gibbs
//! state of an effective Hamiltonian `H(λ) = Σ λₖ Mₖ`; each Gibbs state is
//! prepared by a simulated variational circuit that minimizes a truncated free
//! energy (the inner level), and the multipliers `λ` are updated until the
//! prepared state reproduces the measured record (the outer level).
//!
//! Qubit 0 is the least-significant bit of every basis-state index.

pub mod circuit;
pub mod error;
pub mod gibbs;
pub mod harness;
pub mod maxent;
pub mod optim;
pub mod pauli;
pub mod qmath;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
