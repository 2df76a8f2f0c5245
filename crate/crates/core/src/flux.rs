//! Physical flux models, monotone numerical fluxes and the flux-difference
//! quantity `a(p)` with its sampled inequality checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Closed-form smooth fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FluxKind {
    /// `f(u) = speed * u`.
    Linear { speed: f64 },
    /// `f(u) = u^2 / 2`.
    Burgers,
}

/// A physical flux on a declared working interval, with derivative bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxModel {
    pub kind: FluxKind,
    pub u_min: f64,
    pub u_max: f64,
    /// Bounds on `|f'|`, `|f''|`, `|f'''|` over `[u_min, u_max]`.
    pub bounds: [f64; 3],
}

impl FluxModel {
    pub fn new(kind: FluxKind, u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite() && u_min < u_max) {
            return Err(invalid(format!("bad working interval [{u_min}, {u_max}]")));
        }
        let bounds = match kind {
            FluxKind::Linear { speed } => {
                if !speed.is_finite() {
                    return Err(invalid("linear flux speed must be finite"));
                }
                [speed.abs(), 0.0, 0.0]
            }
            FluxKind::Burgers => [u_min.abs().max(u_max.abs()), 1.0, 0.0],
        };
        Ok(Self {
            kind,
            u_min,
            u_max,
            bounds,
        })
    }

    pub fn linear(speed: f64, u_min: f64, u_max: f64) -> Result<Self> {
        Self::new(FluxKind::Linear { speed }, u_min, u_max)
    }

    pub fn burgers(u_min: f64, u_max: f64) -> Result<Self> {
        Self::new(FluxKind::Burgers, u_min, u_max)
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        match self.kind {
            FluxKind::Linear { speed } => speed * u,
            FluxKind::Burgers => 0.5 * u * u,
        }
    }

    #[inline]
    pub fn df(&self, u: f64) -> f64 {
        match self.kind {
            FluxKind::Linear { speed } => speed,
            FluxKind::Burgers => u,
        }
    }

    #[inline]
    pub fn d2f(&self, _u: f64) -> f64 {
        match self.kind {
            FluxKind::Linear { .. } => 0.0,
            FluxKind::Burgers => 1.0,
        }
    }

    #[inline]
    pub fn d3f(&self, _u: f64) -> f64 {
        0.0
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, FluxKind::Linear { .. })
    }

    pub fn contains(&self, u: f64) -> bool {
        u >= self.u_min && u <= self.u_max
    }

    fn check_args(&self, a: f64, b: f64) -> Result<()> {
        if self.contains(a) && self.contains(b) {
            Ok(())
        } else {
            Err(invalid(format!(
                "flux arguments ({a}, {b}) outside working interval [{}, {}]",
                self.u_min, self.u_max
            )))
        }
    }

    /// Points in `[lo, hi]` where `f'` changes sign, plus both endpoints, sorted.
    fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        const PANELS: usize = 8;
        let mut pts = vec![lo];
        if hi > lo {
            let width = (hi - lo) / PANELS as f64;
            for i in 0..PANELS {
                let a = lo + i as f64 * width;
                let b = if i + 1 == PANELS { hi } else { a + width };
                if let Some(r) = bracket_root(|u| self.df(u), a, b) {
                    pts.push(r);
                }
            }
            pts.push(hi);
        }
        pts
    }

    /// Whether `f'` keeps a sign on `[lo, hi]`: `Some(true)` for `f' >= 0`,
    /// `Some(false)` for `f' < 0`, `None` if it changes sign.
    fn derivative_sign(&self, lo: f64, hi: f64) -> Option<bool> {
        const SAMPLES: usize = 16;
        let mut nonneg = true;
        let mut neg = true;
        for i in 0..=SAMPLES {
            let u = lo + (hi - lo) * i as f64 / SAMPLES as f64;
            let d = self.df(u);
            nonneg &= d >= 0.0;
            neg &= d < 0.0;
        }
        if nonneg {
            Some(true)
        } else if neg {
            Some(false)
        } else {
            None
        }
    }
}

/// Root of `g` on `[a, b]` by bisection when the endpoint values straddle zero.
fn bracket_root<G: Fn(f64) -> f64>(g: G, a: f64, b: f64) -> Option<f64> {
    let (mut lo, mut hi) = (a, b);
    let (mut glo, ghi) = (g(lo), g(hi));
    if glo == 0.0 {
        return Some(lo);
    }
    if ghi == 0.0 {
        return Some(hi);
    }
    if glo.signum() == ghi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Godunov flux: `min_{[a,b]} f` if `a <= b`, else `max_{[b,a]} f`.
pub fn godunov_flux(model: &FluxModel, a: f64, b: f64) -> Result<f64> {
    model.check_args(a, b)?;
    Ok(godunov_unchecked(model, a, b))
}

fn godunov_unchecked(model: &FluxModel, a: f64, b: f64) -> f64 {
    match model.kind {
        FluxKind::Linear { speed } => {
            if speed >= 0.0 {
                speed * a
            } else {
                speed * b
            }
        }
        FluxKind::Burgers => {
            let (fa, fb) = (model.f(a), model.f(b));
            if a > b {
                fa.max(fb)
            } else if a <= 0.0 && 0.0 <= b {
                0.0
            } else {
                fa.min(fb)
            }
        }
    }
}

#[cfg(test)]
fn generic_godunov(model: &FluxModel, a: f64, b: f64) -> f64 {
    if a == b {
        return model.f(a);
    }
    let pts = model.critical_points(a.min(b), a.max(b));
    let values = pts.iter().map(|&u| model.f(u));
    if a <= b {
        values.fold(f64::INFINITY, f64::min)
    } else {
        values.fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Upwind flux: `f(a)` if `f' >= 0` between the traces, `f(b)` if `f' < 0`,
/// and the Godunov value where `f'` changes sign.
pub fn upwind_flux(model: &FluxModel, a: f64, b: f64) -> Result<f64> {
    model.check_args(a, b)?;
    Ok(upwind_unchecked(model, a, b))
}

fn upwind_unchecked(model: &FluxModel, a: f64, b: f64) -> f64 {
    match model.derivative_sign(a.min(b), a.max(b)) {
        Some(true) => model.f(a),
        Some(false) => model.f(b),
        None => godunov_unchecked(model, a, b),
    }
}

/// Engquist-Osher flux `(f(a) + f(b))/2 - (1/2) int_a^b |f'|`.
pub fn engquist_osher_flux(model: &FluxModel, a: f64, b: f64) -> Result<f64> {
    model.check_args(a, b)?;
    Ok(engquist_osher_unchecked(model, a, b))
}

fn engquist_osher_unchecked(model: &FluxModel, a: f64, b: f64) -> f64 {
    let pts = model.critical_points(a.min(b), a.max(b));
    let variation: f64 = pts
        .windows(2)
        .map(|w| (model.f(w[1]) - model.f(w[0])).abs())
        .sum();
    let signed = if a <= b { variation } else { -variation };
    0.5 * (model.f(a) + model.f(b)) - 0.5 * signed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericalFluxKind {
    Godunov,
    EngquistOsher,
    PureUpwind,
}

/// Monotone numerical flux `h(a, b)` bound to a physical flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericalFlux {
    pub model: FluxModel,
    pub kind: NumericalFluxKind,
}

impl NumericalFlux {
    pub fn new(model: FluxModel, kind: NumericalFluxKind) -> Self {
        Self { model, kind }
    }

    /// Checked evaluation; arguments must lie in the working interval.
    pub fn eval(&self, a: f64, b: f64) -> Result<f64> {
        self.model.check_args(a, b)?;
        Ok(self.eval_unchecked(a, b))
    }

    /// Evaluation without the working-interval check, for inner loops.
    #[inline]
    pub fn eval_unchecked(&self, a: f64, b: f64) -> f64 {
        match self.kind {
            NumericalFluxKind::Godunov => godunov_unchecked(&self.model, a, b),
            NumericalFluxKind::EngquistOsher => engquist_osher_unchecked(&self.model, a, b),
            NumericalFluxKind::PureUpwind => upwind_unchecked(&self.model, a, b),
        }
    }
}

/// `a(p) = (f(pbar) - h(p^-, p^+)) / [[p]]`, or `|f'(pbar)|` for a zero jump.
pub fn a_quantity(flux: &NumericalFlux, p_minus: f64, p_plus: f64) -> f64 {
    let model = &flux.model;
    let jump = p_plus - p_minus;
    let mean = 0.5 * (p_plus + p_minus);
    if jump == 0.0 {
        model.df(mean).abs()
    } else {
        (model.f(mean) - flux.eval_unchecked(p_minus, p_plus)) / jump
    }
}

/// Outcome of one sampled inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub name: String,
    /// Smallest value of `rhs - lhs` over all samples; negative means violated.
    pub worst_margin: f64,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxInequalityReport {
    pub flux_kind: NumericalFluxKind,
    pub model: FluxKind,
    pub samples: usize,
    pub seed: u64,
    pub c_star: f64,
    pub c: f64,
    pub a_bound: f64,
    pub checks: Vec<InequalityCheck>,
    pub pass: bool,
}

/// Absolute slack granted to every sampled inequality.
const INEQUALITY_SLACK: f64 = 1e-12;

/// Samples pairs in the working interval and checks
/// `0 <= a(p) <= M_1`,
/// `|f'(pbar)|/2 <= a + c_* |[[p]]|`,
/// `-f''(pbar) [[p]] / 8 <= a + c_* [[p]]^2` and
/// `a <= c |f'(pbar)| + c_* |[[p]]|`
/// with `c_* = max(M_2, M_3)` and `c = 1`.
pub fn check_flux_inequalities(flux: &NumericalFlux, samples: usize, seed: u64) -> Result<FluxInequalityReport> {
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let model = flux.model;
    let c_star = model.bounds[1].max(model.bounds[2]);
    let c = 1.0;
    let a_bound = model.bounds[0];
    let names = [
        "a_nonnegative",
        "a_bounded",
        "half_speed_bound",
        "curvature_bound",
        "flux_difference_bound",
    ];
    let mut worst = [f64::INFINITY; 5];
    let mut violations = [0usize; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let pm = rng.gen_range(model.u_min..=model.u_max);
        let pp = rng.gen_range(model.u_min..=model.u_max);
        let a = a_quantity(flux, pm, pp);
        let jump = pp - pm;
        let mean = 0.5 * (pm + pp);
        let margins = [
            a,
            a_bound - a,
            a + c_star * jump.abs() - 0.5 * model.df(mean).abs(),
            a + c_star * jump * jump + model.d2f(mean) * jump / 8.0,
            c * model.df(mean).abs() + c_star * jump.abs() - a,
        ];
        for (i, m) in margins.iter().enumerate() {
            worst[i] = worst[i].min(*m);
            if *m < -INEQUALITY_SLACK {
                violations[i] += 1;
            }
        }
    }
    let checks: Vec<InequalityCheck> = names
        .iter()
        .enumerate()
        .map(|(i, n)| InequalityCheck {
            name: (*n).to_string(),
            worst_margin: worst[i],
            violations: violations[i],
            pass: violations[i] == 0,
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(FluxInequalityReport {
        flux_kind: flux.kind,
        model: model.kind,
        samples,
        seed,
        c_star,
        c,
        a_bound,
        checks,
        pass,
    })
}
