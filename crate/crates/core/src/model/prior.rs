use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{domain, Result};
use crate::smn::normal_lpdf_r;
use crate::special::{ln_beta, log_student_t_cdf_pair};

use super::params::{GenericExtra, GenericParams, SelParams};

/// Location-scale Student-t prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTPrior {
    pub location: f64,
    pub scale: f64,
    pub df: f64,
}

/// Weakly informative priors. Defaults: `β, γ ~ N(0, 10²)`, `ρ ~ U(−1, 1)`,
/// `σ² ~ half-Cauchy(0, 4)`, `ν ~ t₄(0, 5)` truncated to `ν > 2`,
/// `ν₁ ~ Beta(2, 6)`, `ν₂ ~ Beta(2, 12)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub beta_sd: f64,
    pub gamma_sd: f64,
    pub sigma2_cauchy_scale: f64,
    pub nu_t_prior: StudentTPrior,
    /// Lower truncation point of the `ν` prior.
    pub nu_lower: f64,
    pub nu1_beta: (f64, f64),
    pub nu2_beta: (f64, f64),
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            beta_sd: 10.0,
            gamma_sd: 10.0,
            sigma2_cauchy_scale: 4.0,
            nu_t_prior: StudentTPrior { location: 0.0, scale: 5.0, df: 4.0 },
            nu_lower: 2.0,
            nu1_beta: (2.0, 6.0),
            nu2_beta: (2.0, 12.0),
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let scales = [
            self.beta_sd,
            self.gamma_sd,
            self.sigma2_cauchy_scale,
            self.nu_t_prior.scale,
            self.nu_t_prior.df,
            self.nu1_beta.0,
            self.nu1_beta.1,
            self.nu2_beta.0,
            self.nu2_beta.1,
        ];
        if scales.iter().all(|&s| s > 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(domain("PriorSpec", "all scales and shapes must be positive"))
        }
    }

    /// `ln P(ν > nu_lower)` under the untruncated t prior.
    fn ln_nu_mass(&self) -> f64 {
        let t = self.nu_t_prior;
        log_student_t_cdf_pair((self.nu_lower - t.location) / t.scale, t.df).1
    }

    pub(crate) fn log_density<T: Real>(&self, g: &GenericParams<T>) -> T {
        let mut lp = T::cst(0.0);
        let zero = T::cst(0.0);
        let beta_var = T::cst(self.beta_sd * self.beta_sd);
        for &b in &g.beta {
            lp += normal_lpdf_r(b, zero, beta_var);
        }
        let gamma_var = T::cst(self.gamma_sd * self.gamma_sd);
        for &c in &g.gamma {
            lp += normal_lpdf_r(c, zero, gamma_var);
        }
        // half-Cauchy: 2 / (π s (1 + (σ²/s)²))
        let s = self.sigma2_cauchy_scale;
        let r = g.sigma2 / s;
        lp += T::cst((2.0 / (std::f64::consts::PI * s)).ln()) - (r * r).ln_1p();
        // ρ ~ U(−1, 1)
        lp += T::cst(-std::f64::consts::LN_2);
        match g.extra {
            GenericExtra::Normal => {}
            GenericExtra::StudentT { nu } => {
                let t = self.nu_t_prior;
                lp += ((nu - t.location) / t.scale).log_t_pdf(T::cst(t.df))
                    - (t.scale.ln() + self.ln_nu_mass());
            }
            GenericExtra::ContaminatedNormal { ln_nu1, ln_1m_nu1, ln_nu2, ln_1m_nu2, .. } => {
                let (a1, b1) = self.nu1_beta;
                let (a2, b2) = self.nu2_beta;
                lp += ln_nu1 * (a1 - 1.0) + ln_1m_nu1 * (b1 - 1.0) - ln_beta(a1, b1);
                lp += ln_nu2 * (a2 - 1.0) + ln_1m_nu2 * (b2 - 1.0) - ln_beta(a2, b2);
            }
        }
        lp
    }
}

/// Sum of the independent log prior densities at `params`.
pub fn log_prior(params: &SelParams, spec: &PriorSpec) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    if let super::params::FamilyParams::StudentT { nu } = params.extra {
        if nu <= spec.nu_lower {
            return Err(domain("log_prior", format!("nu = {nu} below the prior support")));
        }
    }
    Ok(spec.log_density(&GenericParams::from_params(params)))
}
