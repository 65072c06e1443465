//! Symbolic and numeric toolkit for stochastic Lie systems.
//!
//! The crate decides whether a stochastic differential equation written as a
//! Stratonovich operator is a stochastic Lie system (its component fields span
//! a finite-dimensional Lie algebra), converts between Ito and Stratonovich
//! forms, builds and verifies superposition rules through diagonal
//! prolongations and first integrals, and analyzes equilibria, stability, and
//! relative equilibria of the Hamiltonian systems among them.
//!
//! All symbolic computation is exact over arbitrary-precision rationals;
//! floating point enters only in path simulation and in numerically verified
//! reports. Monte Carlo ensembles and multi-trial verification parallelize
//! with rayon under the default `parallel` feature; every parallel entry
//! point has a sequential twin producing bit-identical results.

pub mod error;
pub mod exec;
pub mod hamiltonian;
pub mod liealg;
pub mod models;
pub mod numlin;
pub mod poly;
pub mod prolong;
pub mod sde;
pub mod stability;
pub mod stratonovich;
pub mod vecfield;

pub use error::{Error, Result};
