//! Predictive model-comparison criteria from a draws × units matrix of
//! pointwise log-likelihoods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const MIN_LOO_DRAWS: usize = 100;
/// Fraction of the largest importance ratios replaced by Pareto quantiles.
pub const PSIS_TAIL_FRACTION: f64 = 0.2;
pub const PARETO_K_WARN: f64 = 0.7;

fn log_sum_exp_slice(x: &[f64]) -> f64 {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Transposes rows of draws into per-unit columns, checking shape and finiteness.
fn columns<R: AsRef<[f64]>>(pointwise: &[R], min_draws: usize) -> Result<Vec<Vec<f64>>> {
    let s = pointwise.len();
    if s < min_draws {
        return Err(Error::InsufficientDraws(format!("need {min_draws} draws, got {s}")));
    }
    let n = pointwise[0].as_ref().len();
    let mut cols = vec![Vec::with_capacity(s); n];
    for row in pointwise {
        let row = row.as_ref();
        if row.len() != n {
            return Err(Error::Dimension("pointwise rows differ in length".into()));
        }
        for (col, &v) in cols.iter_mut().zip(row) {
            if !v.is_finite() {
                return Err(domain("pointwise log-likelihood", "non-finite entry"));
            }
            col.push(v);
        }
    }
    Ok(cols)
}

/// `ln((1/S) Σ_s e^{ℓ_s})`
fn log_mean_exp(x: &[f64]) -> f64 {
    log_sum_exp_slice(x) - (x.len() as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
}

/// `waic = −2 (lppd − p_waic)` with `p_waic` the summed posterior variances
/// of the pointwise log-likelihood.
pub fn waic<R: AsRef<[f64]>>(pointwise: &[R]) -> Result<Waic> {
    let cols = columns(pointwise, 2)?;
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for col in &cols {
        lppd += log_mean_exp(col);
        // shifted two-sum: exactly zero for constant columns
        let s = col.len() as f64;
        let (sum, sum_sq) = col.iter().fold((0.0, 0.0), |(a, b), v| {
            let d = v - col[0];
            (a + d, b + d * d)
        });
        p_waic += ((sum_sq - sum * sum / s) / (s - 1.0)).max(0.0);
    }
    Ok(Waic { waic: -2.0 * (lppd - p_waic), p_waic, lppd })
}

/// Probability-weighted-moment fit of a generalized Pareto with location 0
/// to `x`. Returns `(k, sigma)`; `k` is the tail shape.
pub fn gpd_fit_pwm(x: &[f64]) -> (f64, f64) {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let a0 = sorted.iter().sum::<f64>() / n;
    let a1 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 - (i as f64 + 1.0 - 0.35) / n) * v)
        .sum::<f64>()
        / n;
    let denom = a0 - 2.0 * a1;
    if !(denom > 0.0) {
        return (f64::INFINITY, f64::NAN);
    }
    (2.0 - a0 / denom, 2.0 * a0 * a1 / denom)
}

fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k.abs() < 1e-12 {
        -sigma * (-p).ln_1p()
    } else {
        sigma * ((-k * (-p).ln_1p()).exp_m1()) / k
    }
}

/// Pareto-smoothed log importance weights for one unit from its log-likelihood
/// draws. Returns the (unnormalized) log weights and the tail shape `k̂`,
/// which is `+∞` when the tail was too short or flat to fit.
pub fn psis_log_weights(log_lik: &[f64]) -> (Vec<f64>, f64) {
    let s = log_lik.len();
    let raw: Vec<f64> = log_lik.iter().map(|l| -l).collect();
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lw: Vec<f64> = raw.iter().map(|r| r - max).collect();
    let tail_len = (PSIS_TAIL_FRACTION * s as f64).ceil() as usize;
    let mut k = f64::INFINITY;
    if tail_len >= 5 && tail_len < s {
        let mut order: Vec<usize> = (0..s).collect();
        order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
        let tail = &order[s - tail_len..];
        let cutoff = lw[order[s - tail_len - 1]];
        let tail_vals: Vec<f64> = tail.iter().map(|&i| lw[i]).collect();
        let spread = tail_vals[tail_len - 1] - tail_vals[0];
        if spread > f64::EPSILON / 100.0 {
            let exp_cutoff = cutoff.exp();
            let excess: Vec<f64> = tail_vals.iter().map(|v| v.exp() - exp_cutoff).collect();
            let (khat, sigma) = gpd_fit_pwm(&excess);
            k = khat;
            if khat.is_finite() && sigma.is_finite() {
                for (j, &i) in tail.iter().enumerate() {
                    let p = (j as f64 + 0.5) / tail_len as f64;
                    lw[i] = (gpd_quantile(p, khat, sigma) + exp_cutoff).ln();
                }
            }
        }
    }
    // truncate at the largest raw weight
    for v in &mut lw {
        if *v > 0.0 {
            *v = 0.0;
        }
    }
    (lw, k)
}

/// Self-normalized importance estimate of `ln p(yᵢ | y₋ᵢ)` and `k̂`.
pub fn psis_elpd_unit(log_lik: &[f64]) -> (f64, f64) {
    let (lw, k) = psis_log_weights(log_lik);
    let num: Vec<f64> = lw.iter().zip(log_lik).map(|(w, l)| w + l).collect();
    (log_sum_exp_slice(&num) - log_sum_exp_slice(&lw), k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loo {
    pub looic: f64,
    pub elpd_loo: f64,
    pub pointwise_elpd: Vec<f64>,
    pub pareto_k: Vec<f64>,
}

/// PSIS leave-one-out: `looic = −2 Σᵢ elpd_loo,i`.
pub fn loo_psis<R: AsRef<[f64]> + Sync>(pointwise: &[R]) -> Result<Loo> {
    let cols = columns(pointwise, MIN_LOO_DRAWS)?;
    let per_unit: Vec<(f64, f64)> = cols.par_iter().map(|c| psis_elpd_unit(c)).collect();
    let pointwise_elpd: Vec<f64> = per_unit.iter().map(|u| u.0).collect();
    let pareto_k: Vec<f64> = per_unit.iter().map(|u| u.1).collect();
    let bad = pareto_k.iter().filter(|&&k| k > PARETO_K_WARN).count();
    if bad > 0 {
        log::warn!("{bad} units have Pareto k above {PARETO_K_WARN}; LOO estimates may be unreliable");
    }
    let elpd_loo: f64 = pointwise_elpd.iter().sum();
    Ok(Loo { looic: -2.0 * elpd_loo, elpd_loo, pointwise_elpd, pareto_k })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpo {
    pub log_cpo: Vec<f64>,
    pub lpml: f64,
}

/// Harmonic-mean conditional predictive ordinates, in log space.
pub fn cpo_lpml<R: AsRef<[f64]>>(pointwise: &[R]) -> Result<Cpo> {
    let cols = columns(pointwise, 2)?;
    let log_cpo: Vec<f64> = cols
        .iter()
        .map(|c| {
            let neg: Vec<f64> = c.iter().map(|v| -v).collect();
            -(log_sum_exp_slice(&neg) - (c.len() as f64).ln())
        })
        .collect();
    let lpml = log_cpo.iter().sum();
    Ok(Cpo { log_cpo, lpml })
}
