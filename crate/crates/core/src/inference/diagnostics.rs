//! Interval summaries and convergence diagnostics.

use crate::error::{domain, Error, Result};
use crate::special::std_normal_quantile;

pub const MIN_HPD_DRAWS: usize = 20;
pub const MIN_SPLIT_LEN: usize = 50;

/// Shortest interval holding `⌈mass·M⌉` of the sorted draws. Ties go to the
/// lowest start index.
pub fn hpd_interval(draws: &[f64], mass: f64) -> Result<(f64, f64)> {
    if !(mass > 0.0 && mass < 1.0) {
        return Err(domain("hpd_interval", format!("mass {mass} outside (0, 1)")));
    }
    if draws.len() < MIN_HPD_DRAWS {
        return Err(Error::InsufficientDraws(format!(
            "HPD interval needs {MIN_HPD_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    if draws.iter().any(|x| x.is_nan()) {
        return Err(domain("hpd_interval", "draws contain NaN"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let k = ((mass * m as f64).ceil() as usize).clamp(1, m);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for start in 0..=(m - k) {
        let width = sorted[start + k - 1] - sorted[start];
        if width < best_width {
            best_width = width;
            best = start;
        }
    }
    Ok((sorted[best], sorted[best + k - 1]))
}

/// Halves every chain, dropping the middle draw of odd-length chains.
fn split(chains: &[Vec<f64>]) -> Result<Vec<&[f64]>> {
    if chains.is_empty() {
        return Err(Error::InsufficientDraws("no chains".into()));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Dimension("chains have different lengths".into()));
    }
    let half = n / 2;
    if half < MIN_SPLIT_LEN {
        return Err(Error::InsufficientDraws(format!(
            "split diagnostics need halves of {MIN_SPLIT_LEN} draws, got {half}"
        )));
    }
    Ok(chains.iter().flat_map(|c| [&c[..half], &c[n - half..]]).collect())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Split-chain potential scale reduction. Chains with zero within-chain
/// variance give `NaN`: the ratio is undefined.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let parts = split(chains)?;
    let n = parts[0].len() as f64;
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    let w = mean(&parts.iter().map(|c| sample_var(c)).collect::<Vec<_>>());
    let b = n * sample_var(&means);
    if !(w > 0.0) {
        return Ok(f64::NAN);
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Effective sample size of already-split chains by Geyer's initial
/// monotone sequence on the multi-chain autocorrelation.
fn ess_of_parts(parts: &[&[f64]]) -> f64 {
    let m = parts.len();
    let n = parts[0].len();
    let means: Vec<f64> = parts.iter().map(|c| mean(c)).collect();
    // biased autocovariance averaged over chains
    let acov_mean = |lag: usize| -> f64 {
        parts
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - lag).map(|i| (c[i] - mu) * (c[i + lag] - mu)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let acov0 = acov_mean(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += sample_var(&means);
    }
    if !(var_plus > 0.0) {
        return f64::NAN;
    }

    let mut rho = vec![0.0; n + 1];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
    rho[1] = rho_odd;
    let mut s = 1;
    while s + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = 1.0 - (mean_var - acov_mean(s + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov_mean(s + 2)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[s + 1] = rho_even;
            rho[s + 2] = rho_odd;
        }
        s += 2;
    }
    let max_s = s;
    if rho_even > 0.0 {
        rho[max_s + 1] = rho_even;
    }
    let mut t = 1;
    while t + 3 <= max_s {
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t] {
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0;
            rho[t + 2] = rho[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    (total / tau).min(total * total.log10())
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Bulk effective sample size: ESS of the rank-normalized split chains.
/// Constant draws give `NaN`.
pub fn bulk_ess(chains: &[Vec<f64>]) -> Result<f64> {
    let parts = split(chains)?;
    let pooled: Vec<f64> = parts.iter().flat_map(|c| c.iter().copied()).collect();
    let total = pooled.len() as f64;
    let z: Vec<f64> = ranks(&pooled)
        .into_iter()
        .map(|r| std_normal_quantile((r - 0.375) / (total + 0.25)))
        .collect::<Result<_>>()?;
    let len = parts[0].len();
    let normalized: Vec<&[f64]> = z.chunks(len).collect();
    Ok(ess_of_parts(&normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn brute_force_hpd(draws: &[f64], mass: f64) -> (f64, f64) {
        let mut s = draws.to_vec();
        s.sort_by(f64::total_cmp);
        let k = (mass * s.len() as f64).ceil() as usize;
        let mut best = (f64::INFINITY, 0);
        for start in 0..=s.len() - k {
            for end in start + k - 1..s.len() {
                let w = s[end] - s[start];
                if w < best.0 {
                    best = (w, start);
                }
            }
        }
        (s[best.1], s[best.1 + k - 1])
    }

    #[test]
    fn hpd_of_constant_draws() {
        assert_eq!(hpd_interval(&[2.5; 30], 0.95).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn hpd_of_integers() {
        let draws: Vec<f64> = (1..=100).map(f64::from).collect();
        let (lo, hi) = hpd_interval(&draws, 0.95).unwrap();
        assert_eq!(hi - lo, 94.0);
        assert_eq!((lo, hi), brute_force_hpd(&draws, 0.95));
    }

    #[test]
    fn hpd_is_minimal_on_skewed_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for len in [20, 57, 400, 2000] {
            let draws: Vec<f64> = (0..len)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z.exp()
                })
                .collect();
            assert_eq!(hpd_interval(&draws, 0.9).unwrap(), brute_force_hpd(&draws, 0.9));
        }
    }

    #[test]
    fn hpd_rejects_bad_input() {
        assert!(hpd_interval(&[1.0; 19], 0.95).is_err());
        assert!(hpd_interval(&[1.0; 30], 1.0).is_err());
    }

    fn iid_chains(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn iid_chains_look_converged() {
        let chains = iid_chains(4, 1000, 9);
        let r = split_rhat(&chains).unwrap();
        assert!((0.99..=1.01).contains(&r), "rhat {r}");
        let ess = bulk_ess(&chains).unwrap();
        assert!(ess >= 0.8 * 4000.0, "ess {ess}");
    }

    #[test]
    fn shifted_chain_is_flagged() {
        let mut chains = iid_chains(4, 500, 10);
        chains[2].iter_mut().for_each(|x| *x += 10.0);
        assert!(split_rhat(&chains).unwrap() > 1.5);
    }

    #[test]
    fn constant_chains_are_undefined() {
        let chains = vec![vec![1.0; 200]; 2];
        assert!(split_rhat(&chains).unwrap().is_nan());
        assert!(bulk_ess(&chains).unwrap().is_nan());
    }

    #[test]
    fn autocorrelated_chain_has_low_ess() {
        // AR(1) with φ = 0.9: ESS ≈ M (1 − φ)/(1 + φ)
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = 0.0;
        let chain: Vec<f64> = (0..20000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = 0.9 * x + e;
                x
            })
            .collect();
        let ess = bulk_ess(&[chain]).unwrap();
        let expected = 20000.0 * 0.1 / 1.9;
        assert!((ess / expected - 1.0).abs() < 0.25, "ess {ess} vs {expected}");
    }

    #[test]
    fn short_chains_are_rejected() {
        assert!(split_rhat(&[vec![0.0; 99]]).is_err());
        assert!(bulk_ess(&[vec![0.0; 60], vec![0.0; 61]]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
