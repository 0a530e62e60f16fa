mod common;

use common::normal;
use heckbayes::sim::{generate_dataset, SimConfig};
use heckbayes::special::inverse_mills;
use heckbayes::two_step::{heckman_two_step, probit_mle};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

#[test]
fn mills_ratio_follows_its_asymptote() {
    let z: f64 = -30.0;
    let series = -z - 1.0 / z + 2.0 / z.powi(3) - 10.0 / z.powi(5);
    assert!((inverse_mills(z) - series).abs() < 1e-8);
    assert!((inverse_mills(z) - 30.033).abs() < 1e-3);
}

#[test]
fn probit_estimate_is_consistent() {
    let truth = [1.0, 0.3, -0.5];
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut w = DMatrix::zeros(n, 3);
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        let row = [1.0, normal(&mut rng), normal(&mut rng)];
        let eta: f64 = row.iter().zip(&truth).map(|(a, b)| a * b).sum();
        for (j, v) in row.iter().enumerate() {
            w[(i, j)] = *v;
        }
        c.push(eta + normal(&mut rng) > 0.0);
    }
    let est = probit_mle(&c, &w).unwrap();
    // Fisher information of the probit model at the estimate
    let std = Normal::standard();
    let mut info = DMatrix::<f64>::zeros(3, 3);
    for i in 0..n {
        let row = w.row(i).transpose();
        let eta = row.dot(&est);
        let (pdf, cdf) = (std.pdf(eta), std.cdf(eta));
        info += &row * row.transpose() * (pdf * pdf / (cdf * (1.0 - cdf)));
    }
    let cov = info.try_inverse().unwrap();
    for j in 0..3 {
        let se = cov[(j, j)].sqrt();
        assert!((est[j] - truth[j]).abs() < 3.0 * se, "gamma[{j}] = {} (se {se})", est[j]);
    }
}

#[test]
fn uncorrelated_errors_reproduce_ols() {
    let cfg = SimConfig {
        n: 5000,
        true_params: heckbayes::model::SelParams { rho: 0.0, ..SimConfig::default().true_params },
        ..SimConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let data = generate_dataset(&cfg, &mut rng).unwrap().to_selection_data().unwrap();
    let est = heckman_two_step(&data).unwrap();
    assert!(est.rho_hat.abs() < 0.1, "rho_hat = {}", est.rho_hat);

    let rows: Vec<usize> = (0..data.n()).filter(|&i| data.selected()[i]).collect();
    let x = DMatrix::from_fn(rows.len(), 2, |r, j| data.x_row(rows[r])[j]);
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| data.v1()[i].unwrap()));
    let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
    let ols = &xtx_inv * x.transpose() * &y;
    let resid = &y - &x * &ols;
    let s2 = resid.norm_squared() / (rows.len() - 2) as f64;
    for j in 0..2 {
        let se = (s2 * xtx_inv[(j, j)]).sqrt();
        assert!((est.beta_hat[j] - ols[j]).abs() < 3.0 * se, "beta[{j}]: {} vs {}", est.beta_hat[j], ols[j]);
    }
}

#[test]
fn recovers_outcome_coefficients_on_the_simulation_design() {
    let cfg = SimConfig { n: 800, ..SimConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let hits = (0..10)
        .filter(|_| {
            let data = generate_dataset(&cfg, &mut rng).unwrap().to_selection_data().unwrap();
            let est = heckman_two_step(&data).unwrap();
            (est.beta_hat[0] - 1.0).abs() < 0.3 && (est.beta_hat[1] - 0.5).abs() < 0.3
        })
        .count();
    assert!(hits >= 9, "{hits}/10");
}

#[test]
fn outcome_coefficients_are_unbiased_across_replicates() {
    let cfg = SimConfig { n: 800, ..SimConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let reps = 40;
    let mut mean = [0.0; 2];
    for _ in 0..reps {
        let data = generate_dataset(&cfg, &mut rng).unwrap().to_selection_data().unwrap();
        let est = heckman_two_step(&data).unwrap();
        mean[0] += est.beta_hat[0] / reps as f64;
        mean[1] += est.beta_hat[1] / reps as f64;
    }
    // per-replicate spread is about 0.15, so the mean of 40 has SE near 0.025
    assert!((mean[0] - 1.0).abs() < 0.08 && (mean[1] - 0.5).abs() < 0.08, "{mean:?}");
}
