//! Heckman two-step estimator: probit MLE for the selection equation, then
//! least squares of the observed outcomes on `[x, λ(wᵀγ̂)]`. Used only to
//! initialize the sampler.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FamilyParams, ModelFamily, SelParams, SelectionData};
use crate::special::{inverse_mills, log_std_normal_cdf};

const PROBIT_GRAD_TOL: f64 = 1e-8;
const PROBIT_MAX_ITER: usize = 100;
const SEPARATION_NORM: f64 = 50.0;
const MAX_CONDITION: f64 = 1e10;
const RHO_CLAMP: f64 = 0.95;
const SIGMA2_FLOOR: f64 = 1e-4;

/// Two-step point estimates, already moved inside the parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepEstimate {
    pub gamma_hat: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub sigma2_hat: f64,
    pub rho_hat: f64,
    /// Coefficient on the inverse Mills ratio; `None` when the collinearity
    /// fallback dropped the correction.
    pub mills_coef: Option<f64>,
}

impl TwoStepEstimate {
    /// Starting values for `family`: the Gaussian estimates plus `ν = 5` or
    /// `(ν₁, ν₂) = (0.25, 0.2)`.
    pub fn to_params(&self, family: ModelFamily) -> SelParams {
        let extra = match family {
            ModelFamily::Normal => FamilyParams::Normal,
            ModelFamily::StudentT => FamilyParams::StudentT { nu: 5.0 },
            ModelFamily::ContaminatedNormal => FamilyParams::ContaminatedNormal { nu1: 0.25, nu2: 0.2 },
        };
        SelParams {
            beta: self.beta_hat.clone(),
            gamma: self.gamma_hat.clone(),
            sigma2: self.sigma2_hat,
            rho: self.rho_hat,
            extra,
        }
    }
}

fn probit_loglik(c: &[bool], eta: &DVector<f64>) -> f64 {
    c.iter()
        .zip(eta.iter())
        .map(|(&sel, &z)| if sel { log_std_normal_cdf(z) } else { log_std_normal_cdf(-z) })
        .sum()
}

/// Probit MLE by Newton–Raphson with step halving.
pub fn probit_mle(c: &[bool], w: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (n, q) = w.shape();
    if c.len() != n {
        return Err(Error::Dimension(format!("{} indicators for {} design rows", c.len(), n)));
    }
    let ones = c.iter().filter(|&&s| s).count();
    if ones == 0 || ones == n {
        return Err(Error::Data("probit needs both outcome classes".into()));
    }
    let rank = w.clone().svd(false, false).rank(1e-10 * w.norm().max(1.0));
    if rank < q {
        return Err(Error::RankDeficient(format!("selection design has rank {rank} < {q}")));
    }

    let mut gamma = DVector::zeros(q);
    let mut eta = w * &gamma;
    let mut ll = probit_loglik(c, &eta);
    for _ in 0..PROBIT_MAX_ITER {
        let mut grad = DVector::zeros(q);
        let mut info = DMatrix::zeros(q, q);
        for i in 0..n {
            let sign = if c[i] { 1.0 } else { -1.0 };
            let z = sign * eta[i];
            let lam = inverse_mills(z);
            let row = w.row(i).transpose();
            grad.axpy(sign * lam, &row, 1.0);
            // −d²/dη² ln Φ(sη) = λ(sη)(sη + λ(sη))
            let curvature = lam * (z + lam);
            info.ger(curvature, &row, &row, 1.0);
        }
        if grad.amax() < PROBIT_GRAD_TOL {
            break;
        }
        let step = match info.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => info
                .clone()
                .svd(true, true)
                .solve(&grad, 1e-12)
                .map_err(|e| Error::RankDeficient(e.to_string()))?,
        };
        let mut t = 1.0;
        loop {
            let candidate = &gamma + &step * t;
            let cand_eta = w * &candidate;
            let cand_ll = probit_loglik(c, &cand_eta);
            if cand_ll >= ll || t < 1e-10 {
                if cand_ll >= ll {
                    gamma = candidate;
                    eta = cand_eta;
                    ll = cand_ll;
                }
                break;
            }
            t *= 0.5;
        }
        if gamma.norm() > SEPARATION_NORM {
            return Err(Error::Separation);
        }
        if t < 1e-10 {
            break;
        }
    }
    // a perfect linear classifier means the likelihood has no maximum
    let perfectly_separated =
        c.iter().zip(eta.iter()).all(|(&sel, &z)| if sel { z > 0.0 } else { z < 0.0 });
    if perfectly_separated || gamma.norm() > SEPARATION_NORM {
        return Err(Error::Separation);
    }
    Ok(gamma)
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn ols(design: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    design
        .clone()
        .svd(true, true)
        .solve(y, 1e-14)
        .map_err(|e| Error::RankDeficient(e.to_string()))
}

/// Heckman's two-step estimator.
pub fn heckman_two_step(data: &SelectionData) -> Result<TwoStepEstimate> {
    let p = data.p();
    let n1 = data.n_selected();
    if n1 < p + 2 {
        return Err(Error::Data(format!("{n1} observed units; two-step needs at least {}", p + 2)));
    }
    let w = data.w_matrix();
    let gamma = probit_mle(data.selected(), &w)?;

    let mut design = DMatrix::zeros(n1, p + 1);
    let mut y = DVector::zeros(n1);
    let mut mills = Vec::with_capacity(n1);
    let mut index = Vec::with_capacity(n1);
    for (r, i) in (0..data.n()).filter(|&i| data.selected()[i]).enumerate() {
        let wg: f64 = data.w_row(i).iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
        let lam = inverse_mills(wg);
        for (j, &v) in data.x_row(i).iter().enumerate() {
            design[(r, j)] = v;
        }
        design[(r, p)] = lam;
        y[r] = data.v1()[i].expect("selected units are observed");
        mills.push(lam);
        index.push(wg);
    }

    if condition_number(&design) > MAX_CONDITION {
        log::warn!("inverse Mills column is collinear with the outcome design; dropping the correction");
        let x_only = design.columns(0, p).into_owned();
        let beta = ols(&x_only, &y)?;
        let resid = &y - &x_only * &beta;
        return Ok(TwoStepEstimate {
            gamma_hat: gamma.iter().copied().collect(),
            beta_hat: beta.iter().copied().collect(),
            sigma2_hat: (resid.norm_squared() / n1 as f64).max(SIGMA2_FLOOR),
            rho_hat: 0.0,
            mills_coef: None,
        });
    }

    let coef = ols(&design, &y)?;
    let resid = &y - &design * &coef;
    let b_lambda = coef[p];
    let delta_sum: f64 = mills.iter().zip(&index).map(|(l, z)| l * (l + z)).sum();
    let sigma2 = (resid.norm_squared() / n1 as f64 + b_lambda * b_lambda * delta_sum / n1 as f64)
        .max(SIGMA2_FLOOR);
    let rho = (b_lambda / sigma2.sqrt()).clamp(-RHO_CLAMP, RHO_CLAMP);
    Ok(TwoStepEstimate {
        gamma_hat: gamma.iter().copied().collect(),
        beta_hat: coef.rows(0, p).iter().copied().collect(),
        sigma2_hat: sigma2,
        rho_hat: rho,
        mills_coef: Some(b_lambda),
    })
}
