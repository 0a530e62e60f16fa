//! Posterior summaries, convergence diagnostics, model-comparison criteria
//! and contaminated-normal outlier classification.

mod criteria;
mod diagnostics;

pub use criteria::{
    cpo_lpml, gpd_fit_pwm, loo_psis, psis_elpd_unit, psis_log_weights, waic, Cpo, Loo, Waic, MIN_LOO_DRAWS,
    PARETO_K_WARN, PSIS_TAIL_FRACTION,
};
pub use diagnostics::{bulk_ess, hpd_interval, split_rhat, MIN_HPD_DRAWS, MIN_SPLIT_LEN};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FamilyParams, ModelFamily, SelectionData};
use crate::nuts::PosteriorDraws;
use crate::smn::{cn_log_cdf, cn_posterior_weight};
use crate::special::log_std_normal_cdf;

pub const HPD_MASS: f64 = 0.95;
pub const RHAT_WARN: f64 = 1.01;
/// Units with posterior-mean contamination probability above this are outliers.
pub const OUTLIER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    /// `None` when chains are too short to split.
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criteria {
    pub looic: f64,
    pub elpd_loo: f64,
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
    /// Sum of log CPO values, reported as "CPO (LPML)".
    pub lpml: f64,
    pub pareto_k_max: f64,
    pub pareto_k_high: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_units: usize,
    pub chains: usize,
    pub draws_per_chain: usize,
    pub divergences: usize,
    pub mean_accept_stat: f64,
    pub step_sizes: Vec<f64>,
    pub max_rhat: Option<f64>,
    pub min_ess_bulk: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub eps_bar: Vec<f64>,
    pub flags: Vec<bool>,
}

impl OutlierReport {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Everything reported for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub family: ModelFamily,
    pub params: Vec<String>,
    pub summaries: Vec<ParamSummary>,
    /// `None` when fewer than the draws PSIS needs were kept.
    pub criteria: Option<Criteria>,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outliers: Option<OutlierReport>,
}

/// Posterior probability that each unit came from the inflated-variance
/// component, averaged over draws. Observed units use the outcome density;
/// censored units condition on `Y₂ ≤ 0` only:
/// `ε = ν₁ Φ(−wᵀγ √ν₂) / Ψ^CN(0 | wᵀγ, 1, ν₁, ν₂)`.
pub fn outlier_probs(draws: &PosteriorDraws, data: &SelectionData) -> Result<OutlierReport> {
    if draws.family != ModelFamily::ContaminatedNormal {
        return Err(Error::Family { expected: "cn", got: draws.family.to_string() });
    }
    if draws.dims.p != data.p() || draws.dims.q != data.q() {
        return Err(Error::Dimension("draws and data have different designs".into()));
    }
    let n = data.n();
    let mut sums = vec![0.0; n];
    let mut count = 0usize;
    for theta in draws.params_iter() {
        let theta = theta?;
        let FamilyParams::ContaminatedNormal { nu1, nu2 } = theta.extra else {
            unreachable!("family checked above");
        };
        for (i, s) in sums.iter_mut().enumerate() {
            let wg: f64 = data.w_row(i).iter().zip(&theta.gamma).map(|(a, b)| a * b).sum();
            *s += match data.v1()[i] {
                Some(v) => {
                    let xb: f64 = data.x_row(i).iter().zip(&theta.beta).map(|(a, b)| a * b).sum();
                    cn_posterior_weight(v, xb, theta.sigma2, nu1, nu2)?.value()
                }
                None => {
                    let log_num = nu1.ln() + log_std_normal_cdf(-wg * nu2.sqrt());
                    (log_num - cn_log_cdf(0.0, wg, 1.0, nu1, nu2)?).exp().clamp(0.0, 1.0)
                }
            };
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InsufficientDraws("no draws".into()));
    }
    let eps_bar: Vec<f64> = sums.iter().map(|s| s / count as f64).collect();
    let flags = eps_bar.iter().map(|&e| e > OUTLIER_THRESHOLD).collect();
    Ok(OutlierReport { eps_bar, flags })
}

fn summarize_param(name: &str, chains: &[Vec<f64>]) -> Result<ParamSummary> {
    let merged: Vec<f64> = chains.iter().flatten().copied().collect();
    let m = merged.len();
    if m == 0 {
        return Err(Error::InsufficientDraws("no draws".into()));
    }
    let mean = merged.iter().sum::<f64>() / m as f64;
    let sd = if m > 1 {
        (merged.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
    } else {
        0.0
    };
    let (hpd_lower, hpd_upper) = if m >= MIN_HPD_DRAWS {
        hpd_interval(&merged, HPD_MASS)?
    } else {
        // too few draws for a 95% window; report the range
        let lo = merged.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = merged.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    Ok(ParamSummary {
        name: name.to_string(),
        mean,
        sd,
        hpd_lower,
        hpd_upper,
        rhat: split_rhat(chains).ok(),
        ess_bulk: bulk_ess(chains).ok(),
    })
}

/// Criteria for a pointwise matrix with at least [`MIN_LOO_DRAWS`] rows.
pub fn criteria<R: AsRef<[f64]> + Sync>(pointwise: &[R]) -> Result<Criteria> {
    let w = waic(pointwise)?;
    let l = loo_psis(pointwise)?;
    let c = cpo_lpml(pointwise)?;
    Ok(Criteria {
        looic: l.looic,
        elpd_loo: l.elpd_loo,
        waic: w.waic,
        p_waic: w.p_waic,
        lppd: w.lppd,
        lpml: c.lpml,
        pareto_k_max: l.pareto_k.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        pareto_k_high: l.pareto_k.iter().filter(|&&k| k > PARETO_K_WARN).count(),
    })
}

fn finite_max(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().filter(|v| !v.is_nan()).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

fn finite_min(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    values.flatten().filter(|v| !v.is_nan()).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

/// Assembles summaries, criteria, diagnostics and (for SLcn) outliers.
pub fn summarize(draws: &PosteriorDraws, data: &SelectionData) -> Result<FitReport> {
    if draws.n_draws() == 0 {
        return Err(Error::InsufficientDraws("no draws".into()));
    }
    let summaries = draws
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| summarize_param(name, &draws.param_chains(j)))
        .collect::<Result<Vec<_>>>()?;
    let pointwise = draws.pointwise_merged();
    let criteria = if pointwise.len() >= MIN_LOO_DRAWS {
        Some(criteria(&pointwise)?)
    } else {
        log::warn!("only {} draws; skipping predictive criteria", pointwise.len());
        None
    };
    let max_rhat = finite_max(summaries.iter().map(|s| s.rhat));
    if let Some(r) = max_rhat.filter(|&r| r > RHAT_WARN) {
        log::warn!("max R-hat {r:.3} exceeds {RHAT_WARN}");
    }
    let diagnostics = Diagnostics {
        n_units: data.n(),
        chains: draws.n_chains(),
        draws_per_chain: draws.n_draws(),
        divergences: draws.divergences(),
        mean_accept_stat: draws.mean_accept_stat(),
        step_sizes: draws.chains.iter().map(|c| c.step_size).collect(),
        max_rhat,
        min_ess_bulk: finite_min(summaries.iter().map(|s| s.ess_bulk)),
    };
    let outliers = match draws.family {
        ModelFamily::ContaminatedNormal => Some(outlier_probs(draws, data)?),
        _ => None,
    };
    Ok(FitReport {
        model: draws.family.model_name().to_string(),
        family: draws.family,
        params: draws.names.clone(),
        summaries,
        criteria,
        diagnostics,
        outliers,
    })
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.digits$}"),
        _ => "NA".into(),
    }
}

impl FitReport {
    /// Aligned text table: ME, SD and HPD bounds per parameter, then criteria.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Model: {}", self.model);
        let _ = writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>10} {:>10} {:>8} {:>9}",
            "Parameter", "ME", "SD", "HPD lower", "HPD upper", "R-hat", "ESS"
        );
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<10} {:>10.3} {:>10.3} {:>10.3} {:>10.3} {:>8} {:>9}",
                s.name,
                s.mean,
                s.sd,
                s.hpd_lower,
                s.hpd_upper,
                fmt_opt(s.rhat, 3),
                fmt_opt(s.ess_bulk, 0)
            );
        }
        if let Some(c) = &self.criteria {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<12} {:>12.3}", "LOOIC", c.looic);
            let _ = writeln!(out, "{:<12} {:>12.3}", "WAIC", c.waic);
            let _ = writeln!(out, "{:<12} {:>12.3}", "CPO (LPML)", c.lpml);
        }
        let d = &self.diagnostics;
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "chains {}, draws/chain {}, divergences {}, mean accept {:.3}",
            d.chains, d.draws_per_chain, d.divergences, d.mean_accept_stat
        );
        if let Some(o) = &self.outliers {
            let _ = writeln!(out, "outliers (eps > {OUTLIER_THRESHOLD}): {} of {}", o.n_flagged(), o.flags.len());
        }
        out
    }
}
