#![allow(dead_code)]

use heckbayes::model::{pointwise_loglik, FamilyParams, ModelFamily, SelParams, SelectionData};
use rand::Rng;
use rand_distr::StandardNormal;

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature on a finite interval, started from 16 panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let panels = 16;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            let hi = lo + h;
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            adapt(&f, lo, hi, fa, fm, fb, simpson(fa, fm, fb, lo, hi), tol / panels as f64, 40)
        })
        .sum()
}

/// Integral over the real line via `v = c + s t / (1 - t²)`.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, center: f64, scale: f64, tol: f64) -> f64 {
    integrate(
        |t| {
            let one = 1.0 - t * t;
            if one <= 0.0 {
                return 0.0;
            }
            let v = center + scale * t / one;
            let jac = scale * (1.0 + t * t) / (one * one);
            let y = f(v) * jac;
            if y.is_finite() { y } else { 0.0 }
        },
        -1.0,
        1.0,
        tol,
    )
}

/// Integral over `(-inf, b]` via `v = b - s (1 - t) / t`, `t` in `(0, 1]`.
pub fn integrate_lower_tail<F: Fn(f64) -> f64>(f: F, b: f64, scale: f64, tol: f64) -> f64 {
    integrate(
        |t| {
            if t <= 0.0 {
                return 0.0;
            }
            let v = b - scale * (1.0 - t) / t;
            let y = f(v) * scale / (t * t);
            if y.is_finite() { y } else { 0.0 }
        },
        0.0,
        1.0,
        tol,
    )
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Random parameters with `x = (1, x1)` and `w = (1, w1, w2)` dimensions.
pub fn random_params<R: Rng>(rng: &mut R, family: ModelFamily, p: usize, q: usize) -> SelParams {
    let extra = match family {
        ModelFamily::Normal => FamilyParams::Normal,
        ModelFamily::StudentT => FamilyParams::StudentT { nu: uniform(rng, 2.5, 30.0) },
        ModelFamily::ContaminatedNormal => {
            FamilyParams::ContaminatedNormal { nu1: uniform(rng, 0.05, 0.95), nu2: uniform(rng, 0.05, 0.95) }
        }
    };
    SelParams {
        beta: (0..p).map(|_| uniform(rng, -2.0, 2.0)).collect(),
        gamma: (0..q).map(|_| uniform(rng, -1.5, 1.5)).collect(),
        sigma2: uniform(rng, 0.3, 4.0),
        rho: uniform(rng, -0.95, 0.95),
        extra,
    }
}

/// Random dataset with an intercept in both designs and about 70% observed.
pub fn random_dataset<R: Rng>(rng: &mut R, n: usize) -> SelectionData {
    let mut v1 = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(2 * n);
    let mut w = Vec::with_capacity(3 * n);
    for i in 0..n {
        let w1 = normal(rng);
        let w2 = normal(rng);
        // keep both branches present
        let sel = match i {
            0 => true,
            1 => false,
            _ => rng.random_bool(0.7),
        };
        c.push(sel);
        v1.push(sel.then(|| 1.0 + 0.5 * w1 + 1.5 * normal(rng)));
        x.extend([1.0, w1]);
        w.extend([1.0, w1, w2]);
    }
    SelectionData::new(v1, c, x, 2, w, 3).unwrap()
}

/// One-unit dataset for normalization checks.
pub fn single_unit(v1: Option<f64>, x: &[f64], w: &[f64]) -> SelectionData {
    SelectionData::new_unsized(vec![v1], vec![v1.is_some()], x.to_vec(), x.len(), w.to_vec(), w.len()).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Observed-branch integral plus censored-branch probability of one unit.
pub fn unit_mass(theta: &SelParams, x: &[f64], w: &[f64]) -> f64 {
    let censored = pointwise_loglik(theta, &single_unit(None, x, w)).unwrap()[0].exp();
    let spread = match theta.extra {
        FamilyParams::ContaminatedNormal { nu2, .. } => (theta.sigma2 / nu2).sqrt(),
        _ => theta.sigma2.sqrt(),
    };
    let observed = integrate_real_line(
        |v| pointwise_loglik(theta, &single_unit(Some(v), x, w)).unwrap()[0].exp(),
        dot(x, &theta.beta),
        spread,
        1e-11,
    );
    observed + censored
}

/// Dataset drawn from the normal selection model at `theta` (`p = 2`, `q = 3`).
pub fn model_dataset<R: Rng>(rng: &mut R, theta: &SelParams, n: usize) -> SelectionData {
    let cfg = heckbayes::sim::SimConfig { n, true_params: theta.clone(), ..Default::default() };
    loop {
        let sim = heckbayes::sim::generate_dataset(&cfg, rng).unwrap();
        if let Ok(data) = sim.to_selection_data() {
            return data;
        }
    }
}
