//! Monte Carlo simulation of energy-based stochastic state reduction.
//!
//! The closed-form filtering solution ([`closedform`]) is checked against
//! direct integration of the nonlinear equation ([`integrator`]) and against
//! the ensemble properties collected in [`diagnostics`].

pub mod closedform;
pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod noise;
pub mod runner;
pub mod spectrum;
pub mod state;

pub use error::{Error, Result};
