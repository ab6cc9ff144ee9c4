//! Exact-spectrum analysis of the injection-locked Ising solver model.
//!
//! An instance is an Ising Hamiltonian with unit couplings and optional unit
//! fields on up to [`MAX_SPINS`] spins. The crate enumerates exact spectra by
//! Gray-code streaming, models coupler/field noise and the locking band it
//! induces, runs stochastic mode-selection trials against the exact spectrum,
//! and sweeps instance grids to measure how the per-trial success probability
//! scales with problem size.
//!
//! Energies are exact integers ([`Energy`]); analytic kernels are generic over
//! the float type through [`real::RealScalar`] and default to [`Real`].

pub mod dynamics;
pub mod error;
pub mod generate;
pub mod gray;
pub mod harness;
pub mod instance;
pub mod locking;
pub mod noise;
pub mod real;
pub mod rng;
pub mod spectrum;

pub use error::{Error, Result};
pub use instance::{DecisionInstance, IsingInstance, SpinConfig, MAX_SPINS};

/// Exact instance energies: integer-valued for unit couplings and fields.
pub type Energy = i64;

/// Default float type for analytic quantities.
pub type Real = f64;
