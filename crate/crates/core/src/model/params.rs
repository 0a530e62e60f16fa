use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;
use crate::error::{domain, Error, Result};

/// Error law of a fitted selection model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    /// SLn
    Normal,
    /// SLt
    StudentT,
    /// SLcn
    ContaminatedNormal,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] =
        [ModelFamily::Normal, ModelFamily::StudentT, ModelFamily::ContaminatedNormal];

    pub fn extra_dim(self) -> usize {
        match self {
            ModelFamily::Normal => 0,
            ModelFamily::StudentT => 1,
            ModelFamily::ContaminatedNormal => 2,
        }
    }

    /// Short model name used in reports: SLn, SLt or SLcn.
    pub fn model_name(self) -> &'static str {
        match self {
            ModelFamily::Normal => "SLn",
            ModelFamily::StudentT => "SLt",
            ModelFamily::ContaminatedNormal => "SLcn",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelFamily::Normal => "normal",
            ModelFamily::StudentT => "t",
            ModelFamily::ContaminatedNormal => "cn",
        })
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "n" | "sln" => Ok(ModelFamily::Normal),
            "t" | "student" | "student-t" | "slt" => Ok(ModelFamily::StudentT),
            "cn" | "contaminated" | "contaminated-normal" | "slcn" => Ok(ModelFamily::ContaminatedNormal),
            other => Err(domain("ModelFamily", format!("unknown family '{other}'"))),
        }
    }
}

/// Column counts of the outcome (`p`) and selection (`q`) designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub p: usize,
    pub q: usize,
}

impl ModelDims {
    pub fn unconstrained_dim(self, family: ModelFamily) -> usize {
        self.p + self.q + 2 + family.extra_dim()
    }
}

/// Family-specific shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyParams {
    Normal,
    StudentT { nu: f64 },
    ContaminatedNormal { nu1: f64, nu2: f64 },
}

impl FamilyParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            FamilyParams::Normal => ModelFamily::Normal,
            FamilyParams::StudentT { .. } => ModelFamily::StudentT,
            FamilyParams::ContaminatedNormal { .. } => ModelFamily::ContaminatedNormal,
        }
    }
}

/// Constrained parameters `θ = (β, γ, σ², ρ, shape)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelParams {
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub extra: FamilyParams,
}

/// Image of [`SelParams`] in `ℝ^d`: `(β, γ, ln σ², atanh ρ, ln(ν − 2) | logit ν₁, logit ν₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedVector(pub Vec<f64>);

impl SelParams {
    pub fn family(&self) -> ModelFamily {
        self.extra.family()
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims { p: self.beta.len(), q: self.gamma.len() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.is_empty() || self.gamma.is_empty() {
            return Err(Error::Dimension("beta and gamma must be nonempty".into()));
        }
        if self.beta.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(domain("SelParams", "non-finite regression coefficient"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(domain("SelParams", format!("sigma2 = {}", self.sigma2)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(domain("SelParams", format!("rho = {}", self.rho)));
        }
        match self.extra {
            FamilyParams::Normal => Ok(()),
            FamilyParams::StudentT { nu } if nu > 2.0 && nu.is_finite() => Ok(()),
            FamilyParams::StudentT { nu } => Err(domain("SelParams", format!("nu = {nu} must exceed 2"))),
            FamilyParams::ContaminatedNormal { nu1, nu2 }
                if nu1 > 0.0 && nu1 < 1.0 && nu2 > 0.0 && nu2 < 1.0 =>
            {
                Ok(())
            }
            FamilyParams::ContaminatedNormal { nu1, nu2 } => {
                Err(domain("SelParams", format!("nu1 = {nu1}, nu2 = {nu2} outside (0, 1)")))
            }
        }
    }

    pub fn to_unconstrained(&self) -> UnconstrainedVector {
        let mut u = Vec::with_capacity(self.dims().unconstrained_dim(self.family()));
        u.extend_from_slice(&self.beta);
        u.extend_from_slice(&self.gamma);
        u.push(self.sigma2.ln());
        u.push(self.rho.atanh());
        match self.extra {
            FamilyParams::Normal => {}
            FamilyParams::StudentT { nu } => u.push((nu - 2.0).ln()),
            FamilyParams::ContaminatedNormal { nu1, nu2 } => {
                u.push(logit(nu1));
                u.push(logit(nu2));
            }
        }
        UnconstrainedVector(u)
    }

    pub fn from_unconstrained(u: &[f64], family: ModelFamily, dims: ModelDims) -> Result<Self> {
        let g = GenericParams::<f64>::unpack(u, family, dims)?;
        Ok(g.to_params())
    }

    /// Parameter labels in unconstrained-vector order.
    pub fn names(family: ModelFamily, dims: ModelDims) -> Vec<String> {
        let mut names: Vec<String> = (1..=dims.p).map(|j| format!("beta{j}")).collect();
        names.extend((1..=dims.q).map(|k| format!("gamma{k}")));
        names.push("sigma2".into());
        names.push("rho".into());
        match family {
            ModelFamily::Normal => {}
            ModelFamily::StudentT => names.push("nu".into()),
            ModelFamily::ContaminatedNormal => {
                names.push("nu1".into());
                names.push("nu2".into());
            }
        }
        names
    }

    /// Constrained values flattened in the same order as [`SelParams::names`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.beta.clone();
        out.extend_from_slice(&self.gamma);
        out.push(self.sigma2);
        out.push(self.rho);
        match self.extra {
            FamilyParams::Normal => {}
            FamilyParams::StudentT { nu } => out.push(nu),
            FamilyParams::ContaminatedNormal { nu1, nu2 } => {
                out.push(nu1);
                out.push(nu2);
            }
        }
        out
    }

    /// Inverse of [`SelParams::flatten`].
    pub fn unflatten(values: &[f64], family: ModelFamily, dims: ModelDims) -> Result<Self> {
        let d = dims.unconstrained_dim(family);
        if values.len() != d {
            return Err(Error::Dimension(format!("expected {d} values, got {}", values.len())));
        }
        let (p, q) = (dims.p, dims.q);
        let extra = match family {
            ModelFamily::Normal => FamilyParams::Normal,
            ModelFamily::StudentT => FamilyParams::StudentT { nu: values[p + q + 2] },
            ModelFamily::ContaminatedNormal => {
                FamilyParams::ContaminatedNormal { nu1: values[p + q + 2], nu2: values[p + q + 3] }
            }
        };
        Ok(Self {
            beta: values[..p].to_vec(),
            gamma: values[p..p + q].to_vec(),
            sigma2: values[p + q],
            rho: values[p + q + 1],
            extra,
        })
    }
}

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus<T: Real>(x: T) -> T {
    if x.value() > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Family shape parameters in a generic scalar type, with the logs the
/// likelihood needs precomputed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum GenericExtra<T> {
    Normal,
    StudentT { nu: T },
    ContaminatedNormal { nu1: T, nu2: T, ln_nu1: T, ln_1m_nu1: T, ln_nu2: T, ln_1m_nu2: T },
}

/// Constrained parameters in a generic scalar type.
#[derive(Debug, Clone)]
pub(crate) struct GenericParams<T> {
    pub beta: Vec<T>,
    pub gamma: Vec<T>,
    pub sigma2: T,
    pub rho: T,
    /// `1 − ρ²`, kept separately so it stays positive when `ρ` rounds to ±1.
    pub one_minus_rho2: T,
    pub extra: GenericExtra<T>,
    /// `ln |∂θ/∂u|` of the inverse transform; zero when built from constrained values.
    pub log_jacobian: T,
}

impl<T: Real> GenericParams<T> {
    pub fn unpack(u: &[T], family: ModelFamily, dims: ModelDims) -> Result<Self> {
        let d = dims.unconstrained_dim(family);
        if u.len() != d {
            return Err(Error::Dimension(format!("unconstrained vector has length {}, expected {d}", u.len())));
        }
        let (p, q) = (dims.p, dims.q);
        let u_s = u[p + q];
        let u_r = u[p + q + 1];
        let sigma2 = u_s.exp();
        let rho = u_r.tanh();
        // sech²(u) = 4 e^{-2|u|} / (1 + e^{-2|u|})²
        let abs_r = if u_r.value() < 0.0 { -u_r } else { u_r };
        let e = (abs_r * -2.0).exp();
        let denom = e + 1.0;
        let one_minus_rho2 = e * 4.0 / (denom * denom);
        let ln_one_minus_rho2 = T::cst(4f64.ln()) - abs_r * 2.0 - e.ln_1p() * 2.0;
        let mut log_jacobian = u_s + ln_one_minus_rho2;
        let extra = match family {
            ModelFamily::Normal => GenericExtra::Normal,
            ModelFamily::StudentT => {
                let u_nu = u[p + q + 2];
                log_jacobian += u_nu;
                GenericExtra::StudentT { nu: u_nu.exp() + 2.0 }
            }
            ModelFamily::ContaminatedNormal => {
                let (a, b) = (u[p + q + 2], u[p + q + 3]);
                let ln_nu1 = -softplus(-a);
                let ln_1m_nu1 = -softplus(a);
                let ln_nu2 = -softplus(-b);
                let ln_1m_nu2 = -softplus(b);
                log_jacobian += ln_nu1 + ln_1m_nu1 + ln_nu2 + ln_1m_nu2;
                GenericExtra::ContaminatedNormal {
                    nu1: ln_nu1.exp(),
                    nu2: ln_nu2.exp(),
                    ln_nu1,
                    ln_1m_nu1,
                    ln_nu2,
                    ln_1m_nu2,
                }
            }
        };
        Ok(Self {
            beta: u[..p].to_vec(),
            gamma: u[p..p + q].to_vec(),
            sigma2,
            rho,
            one_minus_rho2,
            extra,
            log_jacobian,
        })
    }
}

impl GenericParams<f64> {
    pub fn from_params(params: &SelParams) -> Self {
        let extra = match params.extra {
            FamilyParams::Normal => GenericExtra::Normal,
            FamilyParams::StudentT { nu } => GenericExtra::StudentT { nu },
            FamilyParams::ContaminatedNormal { nu1, nu2 } => GenericExtra::ContaminatedNormal {
                nu1,
                nu2,
                ln_nu1: nu1.ln(),
                ln_1m_nu1: (-nu1).ln_1p(),
                ln_nu2: nu2.ln(),
                ln_1m_nu2: (-nu2).ln_1p(),
            },
        };
        Self {
            beta: params.beta.clone(),
            gamma: params.gamma.clone(),
            sigma2: params.sigma2,
            rho: params.rho,
            one_minus_rho2: 1.0 - params.rho * params.rho,
            extra,
            log_jacobian: 0.0,
        }
    }

    pub fn to_params(&self) -> SelParams {
        let extra = match self.extra {
            GenericExtra::Normal => FamilyParams::Normal,
            GenericExtra::StudentT { nu } => FamilyParams::StudentT { nu },
            GenericExtra::ContaminatedNormal { nu1, nu2, .. } => FamilyParams::ContaminatedNormal { nu1, nu2 },
        };
        SelParams {
            beta: self.beta.clone(),
            gamma: self.gamma.clone(),
            sigma2: self.sigma2,
            rho: self.rho,
            extra,
        }
    }
}
