//! Forward-mode differentiation with dual numbers.
//!
//! Model code is written once against [`Real`]. Evaluating it with `f64`
//! gives the plain value; evaluating it with [`Dual`] seeded on one
//! coordinate gives the value plus that partial derivative. A gradient of a
//! `d`-dimensional function costs `d` sweeps.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::special::{
    d_log_student_t_cdf_dnu, digamma, ln_gamma_diff, ln_gamma_unchecked, log_std_normal_cdf,
    log_std_normal_pdf, log_student_t_cdf_memo, log_student_t_cdf_unchecked, log_student_t_pdf_unchecked,
};

/// Scalar type the log-posterior is generic over.
pub trait Real:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;

    /// `ln Φ(x)` for the standard normal.
    fn log_norm_cdf(self) -> Self;
    /// `ln Γ(x)`.
    fn ln_gamma(self) -> Self;
    /// `ln Γ(self + h) - ln Γ(self)` for constant `h`.
    fn ln_gamma_diff(self, h: f64) -> Self;
    /// Log-cdf of the standardized Student-t with `nu` degrees of freedom.
    fn log_t_cdf(self, nu: Self) -> Self;
    /// Log-density of the standardized Student-t with `nu` degrees of freedom.
    fn log_t_pdf(self, nu: Self) -> Self {
        let half_nu = nu * 0.5;
        half_nu.ln_gamma_diff(0.5) - (nu * std::f64::consts::PI).ln() * 0.5
            - (nu + 1.0) * 0.5 * (self * self / nu).ln_1p()
    }

    /// `ln(e^a + e^b)`; branch chosen on the real part.
    fn log_sum_exp(self, other: Self) -> Self {
        let (hi, lo) = if self.value() >= other.value() { (self, other) } else { (other, self) };
        if hi.value() == f64::NEG_INFINITY {
            return hi;
        }
        hi + (lo - hi).exp().ln_1p()
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn log_norm_cdf(self) -> Self {
        log_std_normal_cdf(self)
    }
    fn ln_gamma(self) -> Self {
        ln_gamma_unchecked(self)
    }
    fn ln_gamma_diff(self, h: f64) -> Self {
        ln_gamma_diff(self, h)
    }
    fn log_t_cdf(self, nu: Self) -> Self {
        log_student_t_cdf_unchecked(self, nu)
    }
    fn log_t_pdf(self, nu: Self) -> Self {
        log_student_t_pdf_unchecked(self, nu)
    }
}

/// `value + tangent·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub fn new(value: f64, tangent: f64) -> Self {
        Self { value, tangent }
    }

    pub fn constant(value: f64) -> Self {
        Self { value, tangent: 0.0 }
    }

    pub fn variable(value: f64) -> Self {
        Self { value, tangent: 1.0 }
    }

    #[inline]
    fn chain(self, value: f64, derivative: f64) -> Self {
        // skip the multiply so that infinite derivatives at zero tangent stay zero
        let tangent = if self.tangent == 0.0 { 0.0 } else { derivative * self.tangent };
        Self { value, tangent }
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        self.value += rhs.value;
        self.tangent += rhs.tangent;
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(self.value * rhs.value, self.value * rhs.tangent + self.tangent * rhs.value)
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let value = self.value / rhs.value;
        Dual::new(value, (self.tangent - value * rhs.tangent) / rhs.value)
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: f64) -> Dual {
        Dual::new(self.value + rhs, self.tangent)
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: f64) -> Dual {
        Dual::new(self.value - rhs, self.tangent)
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.tangent * rhs)
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: f64) -> Dual {
        Dual::new(self.value / rhs, self.tangent / rhs)
    }
}

impl Real for Dual {
    #[inline]
    fn cst(v: f64) -> Self {
        Dual::constant(v)
    }
    #[inline]
    fn value(self) -> f64 {
        self.value
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        self.chain(self.value.ln(), 1.0 / self.value)
    }
    fn ln_1p(self) -> Self {
        self.chain(self.value.ln_1p(), 1.0 / (1.0 + self.value))
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn powi(self, n: i32) -> Self {
        self.chain(self.value.powi(n), n as f64 * self.value.powi(n - 1))
    }
    fn log_norm_cdf(self) -> Self {
        let v = log_std_normal_cdf(self.value);
        // d/dx ln Φ = φ/Φ, the inverse Mills ratio
        let d = (log_std_normal_pdf(self.value) - v).exp();
        self.chain(v, d)
    }
    fn ln_gamma(self) -> Self {
        self.chain(ln_gamma_unchecked(self.value), digamma(self.value))
    }
    fn ln_gamma_diff(self, h: f64) -> Self {
        self.chain(ln_gamma_diff(self.value, h), digamma(self.value + h) - digamma(self.value))
    }
    fn log_t_cdf(self, nu: Self) -> Self {
        let v = log_student_t_cdf_memo(self.value, nu.value);
        let mut tangent = 0.0;
        if self.tangent != 0.0 {
            let density_ratio = (log_student_t_pdf_unchecked(self.value, nu.value) - v).exp();
            tangent += density_ratio * self.tangent;
        }
        if nu.tangent != 0.0 {
            tangent += d_log_student_t_cdf_dnu(self.value, nu.value) * nu.tangent;
        }
        Dual::new(v, tangent)
    }
    fn log_t_pdf(self, nu: Self) -> Self {
        let v = log_student_t_pdf_unchecked(self.value, nu.value);
        let x = self.value;
        let n = nu.value;
        let q = x * x / n;
        let dx = -(n + 1.0) * x / (n + x * x);
        if nu.tangent == 0.0 {
            return Dual::new(v, dx * self.tangent);
        }
        let dnu = 0.5 * (digamma(0.5 * n + 0.5) - digamma(0.5 * n)) - 0.5 / n - 0.5 * q.ln_1p()
            + 0.5 * (n + 1.0) * q / (n * (1.0 + q));
        Dual::new(v, dx * self.tangent + dnu * nu.tangent)
    }
}

/// Gradient of `f` at `u` by one dual sweep per coordinate.
pub fn gradient<F>(f: F, u: &[f64]) -> Vec<f64>
where
    F: Fn(&[Dual]) -> Dual,
{
    value_and_gradient(f, u).1
}

/// Value and gradient of `f` at `u`. The value comes from the first sweep.
pub fn value_and_gradient<F>(f: F, u: &[f64]) -> (f64, Vec<f64>)
where
    F: Fn(&[Dual]) -> Dual,
{
    let mut point: Vec<Dual> = u.iter().map(|&v| Dual::constant(v)).collect();
    let mut grad = Vec::with_capacity(u.len());
    let mut value = f64::NAN;
    for j in 0..u.len() {
        point[j].tangent = 1.0;
        let out = f(&point);
        point[j].tangent = 0.0;
        if j == 0 {
            value = out.value;
        }
        grad.push(out.tangent);
    }
    if u.is_empty() {
        value = f(&point).value;
    }
    (value, grad)
}

/// Central-difference gradient `(f(u + h e_j) - f(u - h e_j)) / 2h`.
pub fn fd_gradient<F>(u: &[f64], f: F, h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut point = u.to_vec();
    (0..u.len())
        .map(|j| {
            let orig = point[j];
            point[j] = orig + h;
            let up = f(&point);
            point[j] = orig - h;
            let down = f(&point);
            point[j] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{log_std_normal_cdf, log_student_t_cdf_unchecked};

    #[test]
    fn product_rule() {
        let a = Dual::new(3.0, 1.0);
        let b = Dual::new(-2.0, 0.5);
        let p = a * b;
        assert_eq!(p.value, -6.0);
        assert_eq!(p.tangent, 3.0 * 0.5 + 1.0 * -2.0);
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let u = [0.3, -1.7, 4.0, 0.0];
        let g = gradient(
            |x: &[Dual]| x.iter().fold(Dual::constant(0.0), |acc, &v| acc - v * v * 0.5),
            &u,
        );
        for (gi, ui) in g.iter().zip(u.iter()) {
            assert_eq!(*gi, -ui);
        }
    }

    #[test]
    fn fd_exact_for_linear() {
        let f = |x: &[f64]| 3.0 * x[0] - 2.0 * x[1] + 7.0;
        for &h in &[1e-6, 0.1, 10.0] {
            let g = fd_gradient(&[1.5, -2.5], f, h);
            // only rounding error remains, of order eps·|f| / h
            let tol = 1e-14 / h + 1e-12;
            assert!((g[0] - 3.0).abs() < tol && (g[1] + 2.0).abs() < tol);
        }
    }

    #[test]
    fn fd_cubic_truncation_order() {
        // f = u³ at u = 1: central difference error is exactly h²
        let h = 1e-4;
        let g = fd_gradient(&[1.0], |x| x[0].powi(3), h);
        let err = g[0] - 3.0;
        assert!((err - h * h).abs() < 1e-9, "{err}");
    }

    #[test]
    fn zero_tangent_reproduces_plain_values_bitwise() {
        for &x in &[-40.0, -8.5, -1.2, 0.0, 0.7, 9.0] {
            let d = Dual::constant(x);
            assert_eq!(d.log_norm_cdf().value.to_bits(), log_std_normal_cdf(x).to_bits());
            assert_eq!(d.log_t_cdf(Dual::constant(4.5)).value.to_bits(),
                log_student_t_cdf_unchecked(x, 4.5).to_bits());
            assert_eq!(Dual::constant(x.abs() + 0.5).ln_gamma().value.to_bits(),
                Real::ln_gamma(x.abs() + 0.5).to_bits());
            assert_eq!(d.log_t_pdf(Dual::constant(3.3)).value.to_bits(), x.log_t_pdf(3.3).to_bits());
            assert_eq!(d.log_sum_exp(Dual::constant(0.25)).value.to_bits(),
                x.log_sum_exp(0.25).to_bits());
        }
    }

    #[test]
    fn special_function_derivatives_match_fd() {
        let h = 1e-6;
        for &x in &[-30.0, -9.0, -7.9, -1.0, 0.4, 6.0] {
            let d = Dual::variable(x).log_norm_cdf().tangent;
            let fd = (log_std_normal_cdf(x + h) - log_std_normal_cdf(x - h)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-6 * d.abs().max(1.0), "x = {x}");
        }
        for &(x, nu) in &[(-2.0, 3.0), (1.1, 7.5), (-12.0, 2.5)] {
            let dx = Dual::variable(x).log_t_cdf(Dual::constant(nu)).tangent;
            let fdx = (log_student_t_cdf_unchecked(x + h, nu) - log_student_t_cdf_unchecked(x - h, nu))
                / (2.0 * h);
            assert!((dx - fdx).abs() < 1e-6 * dx.abs().max(1.0));
            let dn = Dual::constant(x).log_t_pdf(Dual::variable(nu)).tangent;
            let fdn = ((x).log_t_pdf(nu + h) - (x).log_t_pdf(nu - h)) / (2.0 * h);
            assert!((dn - fdn).abs() < 1e-6 * dn.abs().max(1.0));
            let dxp = Dual::variable(x).log_t_pdf(Dual::constant(nu)).tangent;
            let fdxp = ((x + h).log_t_pdf(nu) - (x - h).log_t_pdf(nu)) / (2.0 * h);
            assert!((dxp - fdxp).abs() < 1e-6 * dxp.abs().max(1.0));
        }
    }

    #[test]
    fn jacobian_term_derivatives() {
        // d/du of log(1 - tanh²u) is -2 tanh u
        for &u in &[-2.0, -0.3, 0.0, 1.4] {
            let g = gradient(|x: &[Dual]| {
                let t = x[0].tanh();
                (Dual::constant(1.0) - t * t).ln()
            }, &[u]);
            assert!((g[0] + 2.0 * f64::tanh(u)).abs() < 1e-12);
        }
    }
}
