//! Bayesian combination of two datasets observed on disjoint units.
//!
//! Units from both sources share covariates but each source observes a
//! different outcome block. The toolkit stacks them into one table with
//! block-missing outcomes, fits Gaussian-process (or linear) latent variable
//! models with an optional probit selection channel by random-walk
//! Metropolis-Hastings, and imputes the missing outcomes from the posterior
//! predictive distribution. A Mahalanobis matching baseline and a simulation
//! benchmark harness are included.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod evalsuite;
pub mod expfam;
pub mod gp_core;
mod linalg;
pub mod model;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
