//! Observed-data log-likelihoods of the SLn, SLt and SLcn models.
//!
//! A selected unit contributes `f(V₁ᵢ) · P(Y₂ᵢ > 0 | Y₁ᵢ = V₁ᵢ)`, an
//! unselected one `P(Y₂ᵢ ≤ 0)`. Everything is accumulated in log space.

use crate::autodiff::Real;
use crate::error::{Error, Result};
use crate::smn::{
    cn_component_lpdfs_r, cn_log_cdf_r, cn_log_upper_prob_r, normal_lpdf_r, t_log_upper_prob_r, t_lpdf_r,
};

use super::data::SelectionData;
use super::params::{GenericExtra, GenericParams, ModelFamily, SelParams};

#[inline]
fn linear_predictor<T: Real>(coef: &[T], row: &[f64]) -> T {
    let mut acc = T::cst(0.0);
    for (&b, &x) in coef.iter().zip(row) {
        acc += b * x;
    }
    acc
}

/// Log-likelihood contribution of unit `i`.
pub(crate) fn unit_loglik<T: Real>(g: &GenericParams<T>, data: &SelectionData, i: usize) -> T {
    let wg = linear_predictor(&g.gamma, data.w_row(i));
    let Some(v) = data.v1()[i] else {
        // unselected: P(Y₂ ≤ 0) = F(−wᵀγ)
        return match g.extra {
            GenericExtra::Normal => (-wg).log_norm_cdf(),
            GenericExtra::StudentT { nu } => (-wg).log_t_cdf(nu),
            GenericExtra::ContaminatedNormal { nu2, ln_nu1, ln_1m_nu1, .. } => {
                cn_log_cdf_r(T::cst(0.0), wg, T::cst(1.0), ln_nu1, ln_1m_nu1, nu2)
            }
        };
    };
    let v = T::cst(v);
    let xb = linear_predictor(&g.beta, data.x_row(i));
    let resid = v - xb;
    let location = wg + g.rho / g.sigma2.sqrt() * resid;
    match g.extra {
        GenericExtra::Normal => {
            normal_lpdf_r(v, xb, g.sigma2) + (location / g.one_minus_rho2.sqrt()).log_norm_cdf()
        }
        GenericExtra::StudentT { nu } => {
            let delta = resid * resid / g.sigma2;
            let scale2 = (nu + delta) / (nu + 1.0) * g.one_minus_rho2;
            t_lpdf_r(v, xb, g.sigma2, nu) + t_log_upper_prob_r(location, scale2, nu + 1.0)
        }
        GenericExtra::ContaminatedNormal { nu2, ln_nu1, ln_1m_nu1, .. } => {
            if nu2.value() == 1.0 {
                return normal_lpdf_r(v, xb, g.sigma2)
                    + (location / g.one_minus_rho2.sqrt()).log_norm_cdf();
            }
            let (heavy, light) = cn_component_lpdfs_r(v, xb, g.sigma2, ln_nu1, ln_1m_nu1, nu2);
            let mix = heavy.log_sum_exp(light);
            // ω and 1 − ω of the conditional law, in log space
            mix + cn_log_upper_prob_r(location, g.one_minus_rho2, heavy - mix, light - mix, nu2)
        }
    }
}

pub(crate) fn pointwise_generic<T: Real>(g: &GenericParams<T>, data: &SelectionData) -> Vec<T> {
    (0..data.n()).map(|i| unit_loglik(g, data, i)).collect()
}

pub(crate) fn loglik_generic<T: Real>(g: &GenericParams<T>, data: &SelectionData) -> T {
    let mut acc = T::cst(0.0);
    for i in 0..data.n() {
        acc += unit_loglik(g, data, i);
    }
    acc
}

fn check(params: &SelParams, data: &SelectionData) -> Result<()> {
    params.validate()?;
    if params.beta.len() != data.p() || params.gamma.len() != data.q() {
        return Err(Error::Dimension(format!(
            "parameters have (p, q) = ({}, {}) but data has ({}, {})",
            params.beta.len(),
            params.gamma.len(),
            data.p(),
            data.q()
        )));
    }
    Ok(())
}

fn require(params: &SelParams, expected: ModelFamily) -> Result<()> {
    if params.family() == expected {
        Ok(())
    } else {
        Err(Error::Family { expected: expected.model_name(), got: params.family().model_name().into() })
    }
}

/// Log-likelihood of whichever family `params` carries.
pub fn loglik(params: &SelParams, data: &SelectionData) -> Result<f64> {
    check(params, data)?;
    Ok(loglik_generic(&GenericParams::from_params(params), data))
}

/// SLn log-likelihood.
pub fn loglik_sln(params: &SelParams, data: &SelectionData) -> Result<f64> {
    require(params, ModelFamily::Normal)?;
    loglik(params, data)
}

/// SLt log-likelihood.
pub fn loglik_slt(params: &SelParams, data: &SelectionData) -> Result<f64> {
    require(params, ModelFamily::StudentT)?;
    loglik(params, data)
}

/// SLcn log-likelihood. `ν₂ = 1` is accepted and reduces to SLn.
pub fn loglik_slcn(params: &SelParams, data: &SelectionData) -> Result<f64> {
    require(params, ModelFamily::ContaminatedNormal)?;
    let mut relaxed = params.clone();
    if let super::params::FamilyParams::ContaminatedNormal { nu1, nu2 } = params.extra {
        if nu2 == 1.0 {
            // validate with an interior placeholder, evaluate at the boundary
            relaxed.extra = super::params::FamilyParams::ContaminatedNormal { nu1, nu2: 0.5 };
            check(&relaxed, data)?;
            return Ok(loglik_generic(&GenericParams::from_params(params), data));
        }
    }
    loglik(params, data)
}

/// Per-unit log contributions; they sum to [`loglik`] exactly.
pub fn pointwise_loglik(params: &SelParams, data: &SelectionData) -> Result<Vec<f64>> {
    check(params, data)?;
    Ok(pointwise_generic(&GenericParams::from_params(params), data))
}
