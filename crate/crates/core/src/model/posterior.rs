use crate::autodiff::{value_and_gradient, Dual, Real};
use crate::error::{Error, Result};

use super::data::SelectionData;
use super::likelihood::loglik_generic;
use super::params::{GenericParams, ModelDims, ModelFamily};
use super::prior::PriorSpec;

/// A differentiable log-density on `ℝ^d`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, q: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the log-density.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

fn eval<T: Real>(u: &[T], data: &SelectionData, prior: &PriorSpec, family: ModelFamily) -> Result<T> {
    let dims = ModelDims { p: data.p(), q: data.q() };
    let g = GenericParams::unpack(u, family, dims)?;
    Ok(loglik_generic(&g, data) + prior.log_density(&g) + g.log_jacobian)
}

/// Log-posterior on the unconstrained scale: log-likelihood + log-prior +
/// log-Jacobian of the inverse transform.
pub fn log_posterior_unconstrained(
    u: &[f64],
    data: &SelectionData,
    prior: &PriorSpec,
    family: ModelFamily,
) -> Result<f64> {
    prior.validate()?;
    eval(u, data, prior, family)
}

/// The sampler's target for one model on one dataset.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    data: &'a SelectionData,
    prior: PriorSpec,
    family: ModelFamily,
    dims: ModelDims,
}

impl<'a> Posterior<'a> {
    pub fn new(data: &'a SelectionData, prior: PriorSpec, family: ModelFamily) -> Result<Self> {
        prior.validate()?;
        if !data.is_fittable() {
            return Err(Error::Data(format!(
                "cannot fit {} units ({} selected) with p + q + 2 = {}",
                data.n(),
                data.n_selected(),
                data.p() + data.q() + 2
            )));
        }
        Ok(Self { data, prior, family, dims: ModelDims { p: data.p(), q: data.q() } })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn data(&self) -> &SelectionData {
        self.data
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    fn check_len(&self, len: usize) -> Result<()> {
        let d = self.dim();
        if len == d {
            Ok(())
        } else {
            Err(Error::Dimension(format!("point has length {len}, expected {d}")))
        }
    }

    pub fn try_log_density(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u.len())?;
        eval(u, self.data, &self.prior, self.family)
    }

    /// Exact gradient by one dual sweep per coordinate.
    pub fn grad(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        Ok(value_and_gradient(|x: &[Dual]| self.eval_dual(x), u).1)
    }

    fn eval_dual(&self, u: &[Dual]) -> Dual {
        eval(u, self.data, &self.prior, self.family).expect("length checked")
    }
}

impl LogDensity for Posterior<'_> {
    fn dim(&self) -> usize {
        self.dims.unconstrained_dim(self.family)
    }

    fn log_density(&self, q: &[f64]) -> f64 {
        self.try_log_density(q).unwrap_or(f64::NEG_INFINITY)
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let (v, g) = value_and_gradient(|x: &[Dual]| self.eval_dual(x), q);
        grad.copy_from_slice(&g);
        v
    }
}
