//! Exact and reference solutions: Fourier solutions of the linear problem,
//! manufactured trigonometric targets with source terms, and fine-grid
//! self-references.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::{FluxModel, NumericalFlux};
use crate::fractional::FractionalOperator;
use crate::mesh::{DGFunction, Mesh};
use crate::quadrature::GaussLegendre;
use crate::scheme::{run, SchemeConfig, SourceFn};

/// `cos * cos(xi_k x) + sin * sin(xi_k x)` with `xi_k = 2 pi k / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub k: u32,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl Mode {
    pub fn sin(k: u32, amplitude: f64) -> Self {
        Self { k, cos: 0.0, sin: amplitude }
    }

    pub fn cos(k: u32, amplitude: f64) -> Self {
        Self { k, cos: amplitude, sin: 0.0 }
    }

    /// Coefficient `c` of `exp(i xi x)` in `c exp(i xi x) + conj(c) exp(-i xi x)`.
    fn complex(&self) -> Complex64 {
        Complex64::new(0.5 * self.cos, -0.5 * self.sin)
    }
}

fn check_modes(modes: &[Mode], length: f64) -> Result<()> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid("domain length must be positive"));
    }
    let mut seen: Vec<u32> = modes.iter().map(|m| m.k).collect();
    seen.sort_unstable();
    if seen.first() == Some(&0) {
        return Err(invalid("mode k = 0 is the mean; use the mean field"));
    }
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("duplicate wavenumber in mode list"));
    }
    if modes.iter().any(|m| !(m.cos.is_finite() && m.sin.is_finite())) {
        return Err(invalid("mode amplitudes must be finite"));
    }
    Ok(())
}

/// A function with exactly known fractional Laplacian, used as error oracle.
pub trait ExactField: Send + Sync {
    fn value(&self, t: f64, x: f64) -> f64;
    /// `g_lambda[u(t, .)](x)`.
    fn fractional(&self, t: f64, x: f64) -> f64;
    /// `|u(t, .)|^2` in the Fourier-normalized `H^{lambda/2}` seminorm.
    fn seminorm_sq(&self, t: f64) -> f64;
}

/// Solution of `u_t + c u_x = g_lambda[u]` on the torus of length `L`:
/// every mode evolves by `exp((-i xi c - |xi|^lambda) t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSolution {
    pub mean: f64,
    pub modes: Vec<Mode>,
    pub speed: f64,
    pub lambda: f64,
    pub length: f64,
}

impl FourierSolution {
    pub fn new(mean: f64, modes: Vec<Mode>, speed: f64, lambda: f64, length: f64) -> Result<Self> {
        check_modes(&modes, length)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if !(speed.is_finite() && mean.is_finite()) {
            return Err(invalid("speed and mean must be finite"));
        }
        Ok(Self {
            mean,
            modes,
            speed,
            lambda,
            length,
        })
    }

    pub fn wavenumber(&self, k: u32) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// Growth rate `-i xi c - |xi|^lambda` of mode `k`.
    pub fn rate(&self, k: u32) -> Complex64 {
        let xi = self.wavenumber(k);
        Complex64::new(-xi.powf(self.lambda), -xi * self.speed)
    }

    /// `mean * s(0) + sum_k 2 Re(s(xi_k) c_k(t) e^{i xi_k x})` for a symbol `s`.
    pub fn apply_symbol(&self, t: f64, x: f64, mean_factor: f64, symbol: impl Fn(u32, f64) -> Complex64) -> f64 {
        let mut acc = self.mean * mean_factor;
        for m in &self.modes {
            let xi = self.wavenumber(m.k);
            let c = m.complex() * (self.rate(m.k) * t).exp();
            let phase = Complex64::new(0.0, xi * x).exp();
            acc += 2.0 * (symbol(m.k, xi) * c * phase).re;
        }
        acc
    }

    pub fn time_derivative(&self, t: f64, x: f64) -> f64 {
        self.apply_symbol(t, x, 0.0, |k, _| self.rate(k))
    }

    pub fn space_derivative(&self, t: f64, x: f64) -> f64 {
        self.apply_symbol(t, x, 0.0, |_, xi| Complex64::new(0.0, xi))
    }

    /// `g_lambda[u_t(t, .)](x)`.
    pub fn fractional_time_derivative(&self, t: f64, x: f64) -> f64 {
        let lam = self.lambda;
        self.apply_symbol(t, x, 0.0, |k, xi| self.rate(k) * -xi.powf(lam))
    }

    pub fn l2_norm_sq(&self, t: f64) -> f64 {
        let modes: f64 = self
            .modes
            .iter()
            .map(|m| 2.0 * (m.complex() * (self.rate(m.k) * t).exp()).norm_sqr())
            .sum();
        self.length * (self.mean * self.mean + modes)
    }

    /// `||E||` of the stage-2 defect at level `t` with step `tau`, by Parseval:
    /// per mode `E = u(t) (e^z - 1 - z - z^2/2)` with `z = tau * rate`.
    pub fn consistency_defect(&self, t: f64, tau: f64) -> f64 {
        let sum: f64 = self
            .modes
            .iter()
            .map(|m| {
                let z = self.rate(m.k) * tau;
                let c = m.complex() * (self.rate(m.k) * t).exp();
                2.0 * (c * exp_remainder3(z)).norm_sqr()
            })
            .sum();
        (self.length * sum).sqrt()
    }
}

/// `e^z - 1 - z - z^2/2` without cancellation for small `z`.
fn exp_remainder3(z: Complex64) -> Complex64 {
    if z.norm() > 0.5 {
        return z.exp() - 1.0 - z - z * z * 0.5;
    }
    let mut term = z * z * z / 6.0;
    let mut acc = term;
    for n in 4..40 {
        term = term * z / n as f64;
        acc += term;
        if term.norm() < 1e-18 * acc.norm() {
            break;
        }
    }
    acc
}

impl ExactField for FourierSolution {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.apply_symbol(t, x, 1.0, |_, _| Complex64::new(1.0, 0.0))
    }

    fn fractional(&self, t: f64, x: f64) -> f64 {
        let lam = self.lambda;
        self.apply_symbol(t, x, 0.0, |_, xi| Complex64::new(-xi.powf(lam), 0.0))
    }

    fn seminorm_sq(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let c = m.complex() * (self.rate(m.k) * t).exp();
                2.0 * self.wavenumber(m.k).powf(self.lambda) * c.norm_sqr()
            })
            .sum::<f64>()
            * self.length
    }
}

/// Manufactured target `u*(t, x) = mean + e^{-decay t} sum_k modes_k(x)` for
/// `u_t + f(u)_x = g_lambda[u] + s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedSolution {
    pub mean: f64,
    pub modes: Vec<Mode>,
    pub decay: f64,
    pub lambda: f64,
    pub length: f64,
    pub model: FluxModel,
}

impl ManufacturedSolution {
    pub fn new(
        mean: f64,
        modes: Vec<Mode>,
        decay: f64,
        lambda: f64,
        length: f64,
        model: FluxModel,
    ) -> Result<Self> {
        check_modes(&modes, length)?;
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(invalid(format!("lambda must lie in (0, 1), got {lambda}")));
        }
        if !(decay.is_finite() && mean.is_finite()) {
            return Err(invalid("decay and mean must be finite"));
        }
        Ok(Self {
            mean,
            modes,
            decay,
            lambda,
            length,
            model,
        })
    }

    fn xi(&self, k: u32) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    /// Spatial part with each mode scaled by `weight(xi)` and optionally differentiated.
    fn spatial(&self, x: f64, derivative: bool, weight: impl Fn(f64) -> f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let xi = self.xi(m.k);
                let (s, c) = (xi * x).sin_cos();
                let v = if derivative {
                    xi * (-m.cos * s + m.sin * c)
                } else {
                    m.cos * c + m.sin * s
                };
                weight(xi) * v
            })
            .sum()
    }

    pub fn time_derivative(&self, t: f64, x: f64) -> f64 {
        -self.decay * (-self.decay * t).exp() * self.spatial(x, false, |_| 1.0)
    }

    pub fn space_derivative(&self, t: f64, x: f64) -> f64 {
        (-self.decay * t).exp() * self.spatial(x, true, |_| 1.0)
    }

    /// `s = u_t + f'(u) u_x - g_lambda[u]`.
    pub fn source(&self, t: f64, x: f64) -> f64 {
        let u = self.value(t, x);
        self.time_derivative(t, x) + self.model.df(u) * self.space_derivative(t, x)
            - self.fractional(t, x)
    }

    pub fn source_fn(&self) -> SourceFn {
        let me = self.clone();
        Arc::new(move |t, x| me.source(t, x))
    }
}

impl ExactField for ManufacturedSolution {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.mean + (-self.decay * t).exp() * self.spatial(x, false, |_| 1.0)
    }

    fn fractional(&self, t: f64, x: f64) -> f64 {
        let lam = self.lambda;
        (-self.decay * t).exp() * self.spatial(x, false, |xi| -xi.powf(lam))
    }

    fn seminorm_sq(&self, t: f64) -> f64 {
        let decay = (-2.0 * self.decay * t).exp();
        self.modes
            .iter()
            .map(|m| self.xi(m.k).powf(self.lambda) * 0.5 * (m.cos * m.cos + m.sin * m.sin))
            .sum::<f64>()
            * self.length
            * decay
    }
}

/// Exact prolongation of `u` onto a mesh whose cell count is a multiple of `u`'s.
pub fn prolong(u: &DGFunction, fine: &Arc<Mesh>) -> Result<DGFunction> {
    let coarse = u.mesh();
    if fine.degree() != coarse.degree()
        || fine.length() != coarse.length()
        || fine.cells() % coarse.cells() != 0
    {
        return Err(invalid("prolongation needs a nested mesh of the same degree"));
    }
    let ratio = fine.cells() / coarse.cells();
    let rule = GaussLegendre::new(fine.degree() + 2);
    let basis: Vec<Vec<f64>> = rule.nodes.iter().map(|&r| fine.basis(r)).collect();
    let half_h = 0.5 * fine.h();
    let mut out = DGFunction::zeros(fine);
    for jf in 0..fine.cells() {
        let jc = jf / ratio;
        let sub = (jf % ratio) as f64;
        let cell = out.cell_mut(jf);
        for (q, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            // reference coordinate of this point in the coarse cell
            let rc = -1.0 + (2.0 * sub + r + 1.0) / ratio as f64;
            let v = w * half_h * u.eval_local(jc, rc);
            for (c, b) in cell.iter_mut().zip(&basis[q]) {
                *c += v * b;
            }
        }
    }
    Ok(out)
}

/// Inputs for a fine-grid self-reference run.
#[derive(Debug, Clone)]
pub struct FineGridSetup {
    pub flux: NumericalFlux,
    pub lambda: f64,
    pub length: f64,
    pub degree: usize,
    pub cfl: f64,
    pub final_time: f64,
    /// Largest number of unknowns allowed for the reference.
    pub max_dofs: usize,
}

/// Solution at the final time on `n_ref` cells, used as exact field for self-convergence.
pub fn fine_grid_reference(
    setup: &FineGridSetup,
    u0: &dyn Fn(f64) -> f64,
    n_ref: usize,
    finest_study_grid: usize,
) -> Result<DGFunction> {
    if n_ref < 4 * finest_study_grid {
        return Err(invalid(format!(
            "reference grid {n_ref} must have at least 4x the finest study grid {finest_study_grid}"
        )));
    }
    let dofs = n_ref * (setup.degree + 1);
    if dofs > setup.max_dofs {
        return Err(Error::Resource(format!(
            "reference with {dofs} unknowns exceeds the budget of {}",
            setup.max_dofs
        )));
    }
    let mesh = Mesh::shared(setup.length, n_ref, setup.degree)?;
    let op = FractionalOperator::assemble(&mesh, setup.lambda, crate::fractional::DEFAULT_ASSEMBLY_TOLERANCE)?;
    let mut cfg = SchemeConfig::new(setup.flux, Arc::new(op), setup.final_time);
    cfg.cfl = setup.cfl;
    let rec = run(&cfg, u0)?;
    Ok(rec.final_solution().clone())
}

/// `||reference - u||` for `u` on a mesh nested in the reference mesh.
pub fn reference_l2_error(reference: &DGFunction, u: &DGFunction) -> Result<f64> {
    let fine = prolong(u, reference.mesh())?;
    let d: f64 = reference
        .coeffs()
        .iter()
        .zip(fine.coeffs())
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(d.sqrt())
}
