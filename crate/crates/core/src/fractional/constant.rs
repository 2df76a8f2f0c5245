//! Normalization constant of the integral form of the fractional Laplacian.
//!
//! `c_lambda` is fixed by requiring the integral formula
//! `g[phi](x) = c_lambda int (phi(x+z) - phi(x)) |z|^{-1-lambda} dz`
//! to reproduce the Fourier symbol `-|xi|^lambda` on `cos(xi x)` at `x = 0`,
//! i.e. `2 c_lambda int_0^inf (1 - cos(xi z)) z^{-1-lambda} dz = |xi|^lambda`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;

/// Resolution of the one-sided integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResolution {
    /// Gauss points per oscillation period.
    pub points_per_period: usize,
    /// Periods integrated numerically before the asymptotic tail.
    pub periods: usize,
}

impl IntegralResolution {
    pub const COARSE: Self = Self {
        points_per_period: 16,
        periods: 64,
    };
    pub const FINE: Self = Self {
        points_per_period: 32,
        periods: 160,
    };
}

/// `int_0^inf (1 - cos(xi z)) z^{-1-lambda} dz` by series near the origin,
/// per-period Gauss-Legendre, and an asymptotic tail.
pub fn one_sided_integral(xi: f64, lambda: f64, res: IntegralResolution) -> f64 {
    let a = 1.0 + lambda;
    // [0, z0] with xi z0 = 1: termwise integration of the cosine series
    let z0 = 1.0 / xi;
    let mut head = 0.0;
    let mut fact = 1.0;
    for r in 1..30 {
        let two_r = 2 * r;
        fact *= ((two_r - 1) * two_r) as f64;
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        let term = sign * xi.powi(two_r) / fact * z0.powf(two_r as f64 - lambda)
            / (two_r as f64 - lambda);
        head += term;
        if term.abs() < 1e-18 * head.abs() {
            break;
        }
    }

    // [z0, A] with A = periods * (2 pi / xi)
    let period = 2.0 * PI / xi;
    let rule = GaussLegendre::new(res.points_per_period);
    let integrand = |z: f64| (1.0 - (xi * z).cos()) * z.powf(-a);
    let mut body = rule.integrate(z0, period, integrand);
    for p in 1..res.periods {
        let lo = p as f64 * period;
        body += rule.integrate(lo, lo + period, integrand);
    }

    // [A, inf): A^{-lambda}/lambda minus the cosine tail, integrated by parts
    // with sin(xi A) = 0, cos(xi A) = 1.
    let big_a = res.periods as f64 * period;
    let mut cos_tail = 0.0;
    let mut coef = a / (xi * xi);
    let mut pow = big_a.powf(-a - 1.0);
    for r in 0..12 {
        let term = coef * pow;
        cos_tail += term;
        let e = a + 2.0 * r as f64;
        coef *= -(e + 1.0) * (e + 2.0) / (xi * xi);
        pow /= big_a * big_a;
    }
    let tail = big_a.powf(-lambda) / lambda - cos_tail;

    head + body + tail
}

/// Closed form `lambda / (2 Gamma(1 - lambda) cos(pi lambda / 2))`.
pub fn c_lambda_closed_form(lambda: f64) -> f64 {
    lambda / (2.0 * gamma(1.0 - lambda) * (0.5 * PI * lambda).cos())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "fractional order lambda must lie in (0, 1), got {lambda}"
        )))
    }
}

/// `c_lambda` from a mode with wavenumber `xi` at the given resolution.
pub fn c_lambda_from_mode(lambda: f64, xi: f64, res: IntegralResolution) -> Result<f64> {
    check_lambda(lambda)?;
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(invalid("wavenumber must be positive"));
    }
    Ok(xi.powf(lambda) / (2.0 * one_sided_integral(xi, lambda, res)))
}

/// Derived `c_lambda`, cross-checked against the closed form and cached per `lambda`.
pub fn derive_c_lambda(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cache.lock().unwrap().get(&lambda.to_bits()) {
        return Ok(c);
    }
    let c = c_lambda_from_mode(lambda, 1.0, IntegralResolution::FINE)?;
    let closed = c_lambda_closed_form(lambda);
    let rel = (c - closed).abs() / closed;
    if rel > 1e-9 {
        return Err(Error::NumericalConsistency(format!(
            "c_lambda quadrature {c} disagrees with closed form {closed} (rel {rel:.2e})"
        )));
    }
    cache.lock().unwrap().insert(lambda.to_bits(), c);
    Ok(c)
}
