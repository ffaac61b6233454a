//! Adaptive ensemble control for linear ARX systems whose measurements are
//! corrupted by mixtures of asymmetric Laplace noise and outliers.
//!
//! - [`ald_noise`]: ALD and Gaussian components, mixtures, pinball loss.
//! - [`estimator`]: iterative quantile filter, RLS baseline, batch oracle.
//! - [`controller`]: certainty-equivalence laws and the Bayesian ensemble.
//! - [`plant`]: ARX simulation, measurement, reference trajectories.
//! - [`harness`]: closed-loop episodes, Monte Carlo, config and CSV.

pub mod ald_noise;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod plant;

pub use error::{Error, Result};
