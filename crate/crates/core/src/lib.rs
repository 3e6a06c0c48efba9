//! Estimation of composite-outcome utilities and clinician decision models
//! from observational treatment decisions.
//!
//! The crate is organised bottom-up:
//!
//! * [`numcore`] dense least squares, logistic regression, Nelder–Mead and
//!   seeded random streams.
//! * [`datamodel`] datasets, Q-function fits, utility and behavior models and
//!   the pseudo-log-likelihood.
//! * [`estimation`] maximum pseudo-likelihood fits (grid search and
//!   random-walk Metropolis).
//! * [`inference`] influence vectors and the kernel-smoothed parametric
//!   bootstrap, including the preference-heterogeneity test.
//! * [`simlab`] generative models, value oracles and the Monte Carlo
//!   replication harness.

pub mod datamodel;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod numcore;
pub mod simlab;

pub use error::{Error, Result};
