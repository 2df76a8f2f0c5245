//! Cell-pair integrals of the kernel `|x - y|^{-1-lambda}` against the
//! orthonormal Legendre basis, in reference units (`h = 1`).
//!
//! On the unit interval the basis is `L_l(t) = sqrt(2l+1) P_l(2t - 1)`.
//! For an unwrapped cell offset `s != 0`,
//!
//! ```text
//! A_s[l][n] = int_0^1 int_0^1 L_l(xi) L_n(eta) |s + eta - xi|^{-1-lambda} deta dxi
//! ```
//!
//! and `A_{-s} = A_s^T`. Offsets are handled in three regimes:
//! `|s| = 1` splits the square at the singular corner and integrates the
//! corner triangle with a Gauss-Jacobi rule carrying the `rho^{-lambda}`
//! weight; `2 <= |s| < FAR_OFFSET` uses tensor Gauss-Legendre;
//! `|s| >= FAR_OFFSET` uses the binomial series of the kernel in
//! `(eta - xi) / s`, summed over periodic images with Hurwitz zeta values.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::quadrature::{binomial, legendre_values, shifted_legendre_monomials, GaussLegendre};

/// Offsets at or beyond this use the far-field series.
pub(crate) const FAR_OFFSET: i64 = 16;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Square {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Square {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] += v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n);
        for r in 0..self.n {
            for c in 0..self.n {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Square) {
        debug_assert_eq!(self.n, other.n);
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
    }

    pub fn symmetrize(&mut self) {
        for r in 0..self.n {
            for c in (r + 1)..self.n {
                let v = 0.5 * (self.get(r, c) + self.get(c, r));
                self.set(r, c, v);
                self.set(c, r, v);
            }
        }
    }

    /// Leading `m x m` sub-block.
    pub fn leading(&self, m: usize) -> Self {
        let mut out = Self::zeros(m);
        for r in 0..m {
            for c in 0..m {
                out.set(r, c, self.get(r, c));
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// Orthonormal Legendre values on the unit interval.
pub(crate) fn unit_basis(degree: usize, t: f64) -> Vec<f64> {
    legendre_values(degree, 2.0 * t - 1.0)
        .into_iter()
        .enumerate()
        .map(|(l, p)| ((2 * l + 1) as f64).sqrt() * p)
        .collect()
}

/// Gauss rule on `[0, 1]` for the weight `rho^gamma`, `gamma > -1`
/// (Golub-Welsch on the Jacobi matrix with `alpha = 0`, `beta = gamma`).
pub(crate) fn gauss_jacobi_unit(points: usize, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(gamma > -1.0);
    let (alpha, beta) = (0.0f64, gamma);
    let mut jac = DMatrix::<f64>::zeros(points, points);
    for i in 0..points {
        let n = i as f64;
        let s = 2.0 * n + alpha + beta;
        let a = if i == 0 {
            (beta - alpha) / (alpha + beta + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        jac[(i, i)] = a;
        if i + 1 < points {
            let m = n + 1.0;
            let t = 2.0 * m + alpha + beta;
            let b = 4.0 * m * (m + alpha) * (m + beta) * (m + alpha + beta)
                / (t * t * (t + 1.0) * (t - 1.0));
            jac[(i, i + 1)] = b.sqrt();
            jac[(i + 1, i)] = b.sqrt();
        }
    }
    let eig = SymmetricEigen::new(jac);
    // int_{-1}^{1} (1+x)^beta dx
    let mu0 = 2f64.powf(beta + 1.0) / (beta + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..points)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            ((1.0 + x) / 2.0, mu0 * v0 * v0 * 2f64.powf(-gamma - 1.0))
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `B(a, n) = Gamma(a) Gamma(n) / Gamma(a + n)` for integer `n >= 1`.
fn beta_int(a: f64, n: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..n {
        r *= if i == 0 { 1.0 } else { i as f64 } / (a + i as f64);
    }
    r
}

/// Same-cell term
/// `int_0^1 int_0^1 (L_l(x) - L_l(y)) (L_n(x) - L_n(y)) |x - y|^{-1-lambda}`
/// for `l, n <= degree`, in closed form.
pub(crate) fn self_block(degree: usize, lambda: f64) -> Square {
    // monomial moments int int (x^p - y^p)(x^q - y^q)|x-y|^{-1-lambda}
    let mono = |p: usize, q: usize| -> f64 {
        let mut acc = 0.0;
        for i in 1..=p {
            for ip in 1..=q {
                let e = p + q - i - ip;
                acc += binomial(p, i) * binomial(q, ip) * beta_int((i + ip) as f64 - lambda, e + 2)
                    / (e + 1) as f64;
            }
        }
        2.0 * acc
    };
    let sl = shifted_legendre_monomials(degree);
    let mut moments = Square::zeros(degree + 1);
    for p in 1..=degree {
        for q in 1..=degree {
            moments.set(p, q, mono(p, q));
        }
    }
    let mut out = Square::zeros(degree + 1);
    for l in 0..=degree {
        for n in 0..=degree {
            let mut acc = 0.0;
            for p in 1..=l {
                for q in 1..=n {
                    acc += sl[l][p] * sl[n][q] * moments.get(p, q);
                }
            }
            out.set(l, n, ((2 * l + 1) as f64 * (2 * n + 1) as f64).sqrt() * acc);
        }
    }
    out.symmetrize();
    out
}

/// `A_1` for the cell immediately to the right, basis degrees up to `degree`.
pub(crate) fn adjacent_block(degree: usize, lambda: f64) -> Square {
    // xi = 1 - a, eta = b, |x - y| = a + b; a = rho u, b = rho (1 - u).
    let inner = GaussLegendre::new(degree + 2);
    let (jn, jw) = gauss_jacobi_unit(degree + 2, -lambda);
    let outer = GaussLegendre::new(40);
    let n = degree + 1;
    let mut out = Square::zeros(n);

    let mut accumulate = |rho: f64, weight: f64, lo: f64, hi: f64| {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&r, &w) in inner.nodes.iter().zip(&inner.weights) {
            let u = mid + half * r;
            let bx = unit_basis(degree, 1.0 - rho * u);
            let by = unit_basis(degree, rho * (1.0 - u));
            let ww = weight * w * half;
            for l in 0..n {
                for m in 0..n {
                    out.add(l, m, ww * bx[l] * by[m]);
                }
            }
        }
    };
    // corner triangle a + b <= 1: weight rho^{-lambda} carried by the rule
    for (&rho, &w) in jn.iter().zip(&jw) {
        accumulate(rho, w, 0.0, 1.0);
    }
    // remainder a + b in [1, 2]: smooth
    for (&r, &w) in outer.nodes.iter().zip(&outer.weights) {
        let rho = 1.5 + 0.5 * r;
        let weight = 0.5 * w * rho.powf(-lambda);
        accumulate(rho, weight, 1.0 - 1.0 / rho, 1.0 / rho);
    }
    out
}

/// Tensor Gauss evaluation of `A_s` for a separated offset `|s| >= 2`.
pub(crate) fn separated_block(s: i64, degree: usize, lambda: f64, rule: &GaussLegendre) -> Square {
    debug_assert!(s.abs() >= 2);
    let n = degree + 1;
    let pts: Vec<(f64, f64, Vec<f64>)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, &w)| {
            let t = 0.5 * (r + 1.0);
            (t, 0.5 * w, unit_basis(degree, t))
        })
        .collect();
    let mut out = Square::zeros(n);
    let sf = s as f64;
    for (xi, wx, bx) in &pts {
        for (eta, wy, by) in &pts {
            let k = wx * wy * (sf + eta - xi).abs().powf(-1.0 - lambda);
            for l in 0..n {
                for m in 0..n {
                    out.add(l, m, k * bx[l] * by[m]);
                }
            }
        }
    }
    out
}

/// Moments `binom(-1-lambda, j) int int L_l(xi) L_n(eta) (eta - xi)^j` for
/// the far-field series.
pub(crate) fn far_field_terms(degree: usize, lambda: f64, terms: usize) -> Vec<Square> {
    let rule = GaussLegendre::new((degree + terms) / 2 + 2);
    let n = degree + 1;
    let pts: Vec<(f64, f64, Vec<f64>)> = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, &w)| {
            let t = 0.5 * (r + 1.0);
            (t, 0.5 * w, unit_basis(degree, t))
        })
        .collect();
    let a0 = -1.0 - lambda;
    let mut coef = 1.0;
    (0..terms)
        .map(|j| {
            if j > 0 {
                coef *= (a0 - (j - 1) as f64) / j as f64;
            }
            let mut m = Square::zeros(n);
            for (xi, wx, bx) in &pts {
                for (eta, wy, by) in &pts {
                    let k = coef * wx * wy * (eta - xi).powi(j as i32);
                    for l in 0..n {
                        for c in 0..n {
                            m.add(l, c, k * bx[l] * by[c]);
                        }
                    }
                }
            }
            m
        })
        .collect()
}

/// Hurwitz zeta `sum_{i >= 0} (q + i)^{-s}` for `s > 1`, `q > 0`
/// (Euler-Maclaurin with Bernoulli corrections).
pub(crate) fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const DIRECT: usize = 20;
    // B_{2r} / (2r)!
    const BERNOULLI_OVER_FACT: [f64; 9] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
        43867.0 / 5109094217170944000.0,
    ];
    debug_assert!(s > 1.0 && q > 0.0);
    let mut sum = 0.0;
    for i in 0..DIRECT {
        sum += (q + i as f64).powf(-s);
    }
    let x = q + DIRECT as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s + 2r - 2)
    let mut rising = s;
    let mut xpow = x.powf(-s - 1.0);
    for (r, b) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = b * rising * xpow;
        tail += term;
        let k = 2.0 * r as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        xpow /= x * x;
    }
    sum + tail
}

/// Triple products `int_0^1 L_m L_n L_l` for `m, n <= degree`, `l <= 2 degree`,
/// indexed `[(m * (degree+1) + n) * (2 degree + 1) + l]`.
pub(crate) fn triple_products(degree: usize) -> Vec<f64> {
    let ext = 2 * degree;
    let rule = GaussLegendre::new(2 * degree + 2);
    let n = degree + 1;
    let mut out = vec![0.0; n * n * (ext + 1)];
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        let b = unit_basis(ext, 0.5 * (r + 1.0));
        for m in 0..n {
            for k in 0..n {
                for l in 0..=ext {
                    out[(m * n + k) * (ext + 1) + l] += 0.5 * w * b[m] * b[k] * b[l];
                }
            }
        }
    }
    out
}

/// Closed form of `int_0^1 L_m L_n(t) (t^{-lambda} + (1-t)^{-lambda}) / lambda dt`,
/// the same-cell mass of the whole-line kernel outside the cell.
pub(crate) fn outside_mass_exact(degree: usize, lambda: f64) -> Square {
    let (nodes, weights) = gauss_jacobi_unit(degree + 2, -lambda);
    let n = degree + 1;
    let mut out = Square::zeros(n);
    for (&t, &w) in nodes.iter().zip(&weights) {
        let b = unit_basis(degree, t);
        for m in 0..n {
            for k in 0..n {
                let sign = if (m + k) % 2 == 0 { 1.0 } else { -1.0 };
                out.add(m, k, w * b[m] * b[k] * (1.0 + sign) / lambda);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_jacobi_integrates_weighted_monomials() {
        for &gamma in &[-0.9, -0.5, -0.1, 0.0, 0.7] {
            let (x, w) = gauss_jacobi_unit(8, gamma);
            for p in 0..16 {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
                let want = 1.0 / (p as f64 + gamma + 1.0);
                assert!((got - want).abs() < 1e-13 * want.max(1.0), "gamma={gamma} p={p}");
            }
        }
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((hurwitz_zeta(2.0, 1.0) - pi2 / 6.0).abs() < 1e-14);
        // zeta(2, 1/2) = 3 zeta(2) ... (2^2 - 1) zeta(2)
        assert!((hurwitz_zeta(2.0, 0.5) - pi2 / 2.0).abs() < 1e-13);
        // direct summation for a non-integer exponent
        let s = 1.5;
        let q = 0.3;
        let mut direct = 0.0;
        for i in 0..2_000_000 {
            direct += (q + i as f64).powf(-s);
        }
        // tail of the direct sum ~ 2 / sqrt(2e6)
        let m = 2_000_000.0 + q;
        direct += m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s);
        assert!((hurwitz_zeta(s, q) - direct).abs() < 1e-10);
    }

    /// Brute-force double integral on a geometrically graded grid.
    fn graded_double_integral<F: Fn(f64, f64) -> f64>(f: F, singular_at_zero: bool) -> f64 {
        let rule = GaussLegendre::new(20);
        let mut edges = vec![0.0];
        if singular_at_zero {
            let mut e: Vec<f64> = (0..60).map(|i| 0.5f64.powi(60 - i)).collect();
            edges.append(&mut e);
        }
        edges.push(1.0);
        edges.dedup();
        let mut acc = 0.0;
        for wa in edges.windows(2) {
            for wb in edges.windows(2) {
                acc += rule.integrate(wa[0], wa[1], |a| rule.integrate(wb[0], wb[1], |b| f(a, b)));
            }
        }
        acc
    }

    #[test]
    fn adjacent_block_matches_graded_quadrature() {
        let lambda = 0.5;
        let blk = adjacent_block(2, lambda);
        for l in 0..3 {
            for n in 0..3 {
                let want = graded_double_integral(
                    |a, b| unit_basis(2, 1.0 - a)[l] * unit_basis(2, b)[n] * (a + b).powf(-1.0 - lambda),
                    true,
                );
                assert!((blk.get(l, n) - want).abs() < 1e-9, "({l},{n}) {} vs {want}", blk.get(l, n));
            }
        }
    }

    #[test]
    fn self_block_matches_graded_quadrature() {
        let lambda = 0.3;
        let blk = self_block(2, lambda);
        let rule = GaussLegendre::new(20);
        let inner = GaussLegendre::new(6);
        let mut edges: Vec<f64> = (0..60).map(|i| 0.5f64.powi(60 - i)).collect();
        edges.insert(0, 0.0);
        edges.push(1.0);
        for l in 0..3 {
            for n in 0..3 {
                // 2 * int_0^1 r^{-1-lambda} int_0^{1-r} (L(y+r) - L(y)) (..) dy dr
                let mut want = 0.0;
                for w in edges.windows(2) {
                    want += rule.integrate(w[0], w[1], |r| {
                        inner.integrate(0.0, 1.0 - r, |y| {
                            let bx = unit_basis(2, y + r);
                            let by = unit_basis(2, y);
                            (bx[l] - by[l]) * (bx[n] - by[n])
                        }) * r.powf(-1.0 - lambda)
                    });
                }
                want *= 2.0;
                assert!((blk.get(l, n) - want).abs() < 1e-10, "({l},{n}) {} vs {want}", blk.get(l, n));
            }
        }
        assert_eq!(blk.get(0, 0), 0.0);
        assert_eq!(blk.get(0, 2), 0.0);
    }

    #[test]
    fn far_series_matches_tensor_gauss() {
        let lambda = 0.7;
        let terms = far_field_terms(4, lambda, 30);
        let rule = GaussLegendre::new(24);
        for &s in &[16i64, 17, 40, -16, -23] {
            let direct = separated_block(s, 4, lambda, &rule);
            let sign = s.signum() as f64;
            let mut series = Square::zeros(5);
            for (j, t) in terms.iter().enumerate() {
                series.add_scaled(sign.powi(j as i32) * (s.abs() as f64).powf(-1.0 - lambda - j as f64), t);
            }
            for (a, b) in direct.data.iter().zip(&series.data) {
                assert!((a - b).abs() < 1e-15 * direct.max_abs().max(1e-300) + 1e-17, "{s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn negative_offsets_are_transposes() {
        let rule = GaussLegendre::new(24);
        let a = separated_block(3, 3, 0.4, &rule);
        let b = separated_block(-3, 3, 0.4, &rule);
        let bt = b.transpose();
        for (x, y) in a.data.iter().zip(&bt.data) {
            assert!((x - y).abs() < 1e-15);
        }
    }
}
