//! Classical training of alternating layered variational circuits from
//! classical shadows of their input states.
//!
//! The pipeline: sample Pauli-basis shadows of the input ([`shadow`]), reduce
//! each observable term to its backward lightcone through the brick circuit
//! ([`lightcone`]), and drive derivative-free optimizers ([`optimizer`]) over
//! the resulting estimate ([`estimator`]). Finite-shot and exact backends share
//! the same interface for comparison.

pub mod ansatz;
pub mod error;
pub mod estimator;
pub mod lightcone;
pub mod optimizer;
pub mod qsim;
pub mod rng;
pub mod shadow;
pub mod tasks;

pub use error::{Error, Result};
