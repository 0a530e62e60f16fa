//! Bayesian Heckman sample-selection models with normal, Student-t and
//! contaminated-normal errors.
//!
//! The crate provides the observed-data likelihoods of the three models, a
//! No-U-Turn sampler driven by forward-mode gradients, posterior summaries
//! and predictive model-selection criteria, the Heckman two-step estimator
//! used for initialization, and a simulation harness.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod inference;
pub mod model;
pub mod nuts;
pub mod sim;
pub mod smn;
pub mod special;
pub mod two_step;

pub use error::{Error, Result};
