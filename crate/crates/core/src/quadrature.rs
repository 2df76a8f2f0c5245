//! Gauss-Legendre rules and Legendre polynomial evaluation.

use std::f64::consts::PI;

/// Gauss-Legendre rule on the reference interval [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    let mut d0 = 0.0;
    let mut d1 = 1.0;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k+1) P_k
        let d2 = d0 + (2.0 * kf + 1.0) * p1;
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Values `P_0(x) .. P_degree(x)` of the Legendre polynomials.
pub fn legendre_values(degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree + 1);
    out.push(1.0);
    if degree >= 1 {
        out.push(x);
    }
    for k in 1..degree {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Derivatives `P'_0(x) .. P'_degree(x)`.
pub fn legendre_derivatives(degree: usize, x: f64) -> Vec<f64> {
    let p = legendre_values(degree, x);
    let mut d = vec![0.0; degree + 1];
    for k in 1..=degree {
        d[k] = if k >= 2 { d[k - 2] } else { 0.0 } + (2.0 * (k as f64) - 1.0) * p[k - 1];
    }
    d
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// Monomial coefficients of the shifted Legendre polynomials on [0, 1]:
/// `P_n(2t - 1) = sum_p table[n][p] t^p`.
pub(crate) fn shifted_legendre_monomials(degree: usize) -> Vec<Vec<f64>> {
    (0..=degree)
        .map(|n| {
            (0..=n)
                .map(|p| {
                    let sign = if (n + p) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * binomial(n, p) * binomial(n + p, p)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in 1..12 {
            let rule = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 17, 40, 64] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn legendre_derivative_matches_finite_difference() {
        let x = 0.37;
        let eps = 1e-6;
        let d = legendre_derivatives(6, x);
        let plus = legendre_values(6, x + eps);
        let minus = legendre_values(6, x - eps);
        for k in 0..=6 {
            let fd = (plus[k] - minus[k]) / (2.0 * eps);
            assert!((fd - d[k]).abs() < 1e-8);
            assert!((legendre_with_derivative(k, x).1 - d[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_monomials_reproduce_legendre() {
        let table = shifted_legendre_monomials(7);
        for &t in &[0.0, 0.2, 0.5, 0.91, 1.0] {
            let p = legendre_values(7, 2.0 * t - 1.0);
            for n in 0..=7 {
                let v: f64 = table[n].iter().enumerate().map(|(i, c)| c * t.powi(i as i32)).sum();
                assert!((v - p[n]).abs() < 1e-11);
            }
        }
    }
}
