//! Scale mixtures of normals: normal, Student-t, contaminated normal and
//! slash error laws, specialized to the scalar blocks the selection
//! likelihoods need.
//!
//! The public functions validate their arguments and work on `f64`. The
//! `*_r` functions are the unchecked generic kernels the likelihoods call
//! with dual numbers.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{domain, Result};
use crate::special::{Probability, LN_SQRT_2PI};

/// Error law of the bivariate selection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ErrorFamily {
    Normal,
    StudentT { nu: f64 },
    ContaminatedNormal { nu1: f64, nu2: f64 },
    /// Data generation only; never fitted.
    Slash { nu: f64 },
}

impl ErrorFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ErrorFamily::Normal => Ok(()),
            ErrorFamily::StudentT { nu } if nu > 2.0 && nu.is_finite() => Ok(()),
            ErrorFamily::StudentT { nu } => {
                Err(domain("ErrorFamily", format!("Student-t nu = {nu} must exceed 2")))
            }
            ErrorFamily::ContaminatedNormal { nu1, nu2 }
                if nu1 > 0.0 && nu1 < 1.0 && nu2 > 0.0 && nu2 < 1.0 =>
            {
                Ok(())
            }
            ErrorFamily::ContaminatedNormal { nu1, nu2 } => Err(domain(
                "ErrorFamily",
                format!("contaminated normal needs nu1, nu2 in (0, 1), got ({nu1}, {nu2})"),
            )),
            ErrorFamily::Slash { nu } if nu > 0.0 && nu.is_finite() => Ok(()),
            ErrorFamily::Slash { nu } => {
                Err(domain("ErrorFamily", format!("slash nu = {nu} must be positive")))
            }
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorFamily::Normal => "normal",
            ErrorFamily::StudentT { .. } => "t",
            ErrorFamily::ContaminatedNormal { .. } => "cn",
            ErrorFamily::Slash { .. } => "slash",
        }
    }
}

/// `Σ = [[σ², ρσ], [ρσ, 1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScale {
    sigma2: f64,
    rho: f64,
}

impl SelectionScale {
    pub fn new(sigma2: f64, rho: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(domain("SelectionScale", format!("sigma2 = {sigma2} must be positive")));
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(domain("SelectionScale", format!("rho = {rho} outside (-1, 1)")));
        }
        Ok(Self { sigma2, rho })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Family-specific part of the law of `Y₂ | Y₁ = v₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConditionalExtra {
    StudentT { df: f64 },
    Contaminated { weight: f64, nu2: f64 },
}

/// Conditional law of the selection error given the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLaw {
    pub location: f64,
    pub scale2: f64,
    pub extra: ConditionalExtra,
}

fn check_scale(func: &'static str, sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(domain(func, format!("sigma2 = {sigma2} must be positive")))
    }
}

fn check_cn(func: &'static str, nu1: f64, nu2: f64) -> Result<()> {
    // nu2 = 1 is admitted as the degenerate case where both components coincide
    if nu1 > 0.0 && nu1 < 1.0 && nu2 > 0.0 && nu2 <= 1.0 {
        Ok(())
    } else {
        Err(domain(func, format!("nu1 = {nu1}, nu2 = {nu2} outside (0, 1)")))
    }
}

// ---- generic kernels -------------------------------------------------------

#[inline]
pub(crate) fn normal_lpdf_r<T: Real>(x: T, mu: T, sigma2: T) -> T {
    let z = x - mu;
    -(z * z / sigma2) * 0.5 - sigma2.ln() * 0.5 - LN_SQRT_2PI
}

#[inline]
pub(crate) fn t_lpdf_r<T: Real>(x: T, mu: T, sigma2: T, nu: T) -> T {
    ((x - mu) / sigma2.sqrt()).log_t_pdf(nu) - sigma2.ln() * 0.5
}

/// Log-densities of the two CN components, already weighted by `ν₁` and `1 - ν₁`.
#[inline]
pub(crate) fn cn_component_lpdfs_r<T: Real>(
    x: T,
    mu: T,
    sigma2: T,
    ln_nu1: T,
    ln_1m_nu1: T,
    nu2: T,
) -> (T, T) {
    let heavy = ln_nu1 + normal_lpdf_r(x, mu, sigma2 / nu2);
    let light = ln_1m_nu1 + normal_lpdf_r(x, mu, sigma2);
    (heavy, light)
}

#[inline]
pub(crate) fn cn_lpdf_r<T: Real>(x: T, mu: T, sigma2: T, ln_nu1: T, ln_1m_nu1: T, nu2: T) -> T {
    if nu2.value() == 1.0 {
        return normal_lpdf_r(x, mu, sigma2);
    }
    let (heavy, light) = cn_component_lpdfs_r(x, mu, sigma2, ln_nu1, ln_1m_nu1, nu2);
    heavy.log_sum_exp(light)
}

/// `ln Ψ^CN(b | μ, σ², ν₁, ν₂)`.
#[inline]
pub(crate) fn cn_log_cdf_r<T: Real>(b: T, mu: T, sigma2: T, ln_nu1: T, ln_1m_nu1: T, nu2: T) -> T {
    let z = (b - mu) / sigma2.sqrt();
    if nu2.value() == 1.0 {
        return z.log_norm_cdf();
    }
    let heavy = ln_nu1 + (z * nu2.sqrt()).log_norm_cdf();
    let light = ln_1m_nu1 + z.log_norm_cdf();
    heavy.log_sum_exp(light)
}

/// `ln P(Y > 0)` for `Y ~ t(location, scale2, df)`.
#[inline]
pub(crate) fn t_log_upper_prob_r<T: Real>(location: T, scale2: T, df: T) -> T {
    (location / scale2.sqrt()).log_t_cdf(df)
}

/// `ln P(Y > 0)` for the CN conditional law, with the mixture weight given
/// through its log and the log of its complement.
#[inline]
pub(crate) fn cn_log_upper_prob_r<T: Real>(
    location: T,
    scale2: T,
    ln_weight: T,
    ln_weight_c: T,
    nu2: T,
) -> T {
    let z = location / scale2.sqrt();
    if nu2.value() == 1.0 {
        return z.log_norm_cdf();
    }
    (ln_weight + (z * nu2.sqrt()).log_norm_cdf()).log_sum_exp(ln_weight_c + z.log_norm_cdf())
}

// ---- checked public API ----------------------------------------------------

/// `ln φ(x | μ, σ²)`.
pub fn normal_logpdf(x: f64, mu: f64, sigma2: f64) -> Result<f64> {
    check_scale("normal_logpdf", sigma2)?;
    Ok(normal_lpdf_r(x, mu, sigma2))
}

/// Log-density of the location-scale Student-t.
pub fn t_logpdf(x: f64, mu: f64, sigma2: f64, nu: f64) -> Result<f64> {
    check_scale("t_logpdf", sigma2)?;
    if !(nu > 0.0) {
        return Err(domain("t_logpdf", format!("nu = {nu} must be positive")));
    }
    Ok(t_lpdf_r(x, mu, sigma2, nu))
}

/// `ln[ν₁ φ(x | μ, σ²/ν₂) + (1 - ν₁) φ(x | μ, σ²)]`.
pub fn cn_logpdf(x: f64, mu: f64, sigma2: f64, nu1: f64, nu2: f64) -> Result<f64> {
    check_scale("cn_logpdf", sigma2)?;
    check_cn("cn_logpdf", nu1, nu2)?;
    Ok(cn_lpdf_r(x, mu, sigma2, nu1.ln(), (-nu1).ln_1p(), nu2))
}

/// Contaminated-normal cdf.
pub fn cn_cdf(b: f64, mu: f64, sigma2: f64, nu1: f64, nu2: f64) -> Result<Probability> {
    Ok(Probability::saturating(cn_log_cdf(b, mu, sigma2, nu1, nu2)?.exp()))
}

/// Contaminated-normal log-cdf.
pub fn cn_log_cdf(b: f64, mu: f64, sigma2: f64, nu1: f64, nu2: f64) -> Result<f64> {
    check_scale("cn_cdf", sigma2)?;
    check_cn("cn_cdf", nu1, nu2)?;
    Ok(cn_log_cdf_r(b, mu, sigma2, nu1.ln(), (-nu1).ln_1p(), nu2))
}

/// Law of `Y₂ | Y₁ = v1` under the bivariate t with unit selection variance.
pub fn t_conditional(
    v1: f64,
    x_mean: f64,
    w_mean: f64,
    scale: SelectionScale,
    nu: f64,
) -> Result<ConditionalLaw> {
    if !(nu > 0.0) {
        return Err(domain("t_conditional", format!("nu = {nu} must be positive")));
    }
    let resid = v1 - x_mean;
    let delta = resid * resid / scale.sigma2;
    Ok(ConditionalLaw {
        location: w_mean + scale.rho / scale.sigma() * resid,
        scale2: (nu + delta) / (nu + 1.0) * (1.0 - scale.rho * scale.rho),
        extra: ConditionalExtra::StudentT { df: nu + 1.0 },
    })
}

/// Law of `Y₂ | Y₁ = v1` under the bivariate contaminated normal.
pub fn cn_conditional(
    v1: f64,
    x_mean: f64,
    w_mean: f64,
    scale: SelectionScale,
    nu1: f64,
    nu2: f64,
) -> Result<ConditionalLaw> {
    let weight = cn_posterior_weight(v1, x_mean, scale.sigma2, nu1, nu2)?.value();
    Ok(ConditionalLaw {
        location: w_mean + scale.rho / scale.sigma() * (v1 - x_mean),
        scale2: 1.0 - scale.rho * scale.rho,
        extra: ConditionalExtra::Contaminated { weight, nu2 },
    })
}

/// `P(U = ν₂ | X = x)`: posterior probability that `x` came from the
/// inflated-variance component.
pub fn cn_posterior_weight(x: f64, mu: f64, sigma2: f64, nu1: f64, nu2: f64) -> Result<Probability> {
    check_scale("cn_posterior_weight", sigma2)?;
    check_cn("cn_posterior_weight", nu1, nu2)?;
    if nu2 == 1.0 {
        return Ok(Probability::saturating(nu1));
    }
    let (heavy, light) = cn_component_lpdfs_r(x, mu, sigma2, nu1.ln(), (-nu1).ln_1p(), nu2);
    Ok(Probability::saturating((heavy - heavy.log_sum_exp(light)).exp()))
}

/// Draw of the bivariate error with its latent mixing value `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateDraw {
    pub e1: f64,
    pub e2: f64,
    pub mixing: f64,
}

/// Gamma(shape, rate) variate by Marsaglia–Tsang, with the `U^{1/shape}`
/// boost for shape < 1.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = rng.random();
        return sample_gamma(shape + 1.0, rate, rng) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x: f64 = rng.sample(StandardNormal);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x.powi(4) || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v / rate;
        }
    }
}

/// Beta(a, b) variate as a ratio of gamma variates.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let x = sample_gamma(a, 1.0, rng);
    let y = sample_gamma(b, 1.0, rng);
    x / (x + y)
}

/// Draws the mixing variable `U` of the SMN representation.
pub fn sample_mixing<R: Rng + ?Sized>(family: &ErrorFamily, rng: &mut R) -> f64 {
    match *family {
        ErrorFamily::Normal => 1.0,
        ErrorFamily::StudentT { nu } => sample_gamma(0.5 * nu, 0.5 * nu, rng),
        ErrorFamily::ContaminatedNormal { nu1, nu2 } => {
            if rng.random::<f64>() < nu1 {
                nu2
            } else {
                1.0
            }
        }
        ErrorFamily::Slash { nu } => sample_beta(nu, 1.0, rng),
    }
}

/// `(ε₁, ε₂) = U^{-1/2} Z` with `Z ~ N₂(0, Σ)`.
pub fn sample_bivariate_error<R: Rng + ?Sized>(
    family: &ErrorFamily,
    scale: SelectionScale,
    rng: &mut R,
) -> BivariateDraw {
    let n1: f64 = rng.sample(StandardNormal);
    let n2: f64 = rng.sample(StandardNormal);
    let z1 = scale.sigma() * n1;
    let z2 = scale.rho * n1 + (1.0 - scale.rho * scale.rho).sqrt() * n2;
    let mixing = sample_mixing(family, rng);
    let s = mixing.sqrt().recip();
    BivariateDraw { e1: s * z1, e2: s * z2, mixing }
}
