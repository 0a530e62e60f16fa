//! The three selection models: data, parameters, likelihoods, priors and
//! the unconstrained log-posterior the sampler targets.

mod data;
mod likelihood;
mod params;
mod posterior;
mod prior;

pub use data::SelectionData;
pub use likelihood::{loglik, loglik_sln, loglik_slcn, loglik_slt, pointwise_loglik};
pub use params::{FamilyParams, ModelFamily, ModelDims, SelParams, UnconstrainedVector};
pub use posterior::{log_posterior_unconstrained, LogDensity, Posterior};
pub use prior::{log_prior, PriorSpec, StudentTPrior};

