//! Convective DG operator, the two-stage Runge-Kutta update and the time loop.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::{FluxModel, NumericalFlux};
use crate::fractional::FractionalOperator;
use crate::mesh::{axpy, l2_project, DGFunction, Mesh, Side};
use crate::projection::{upwind_project, upwind_projection_choice};

/// Default CFL constant for both step-size rules.
pub const DEFAULT_CFL: f64 = 0.1;

/// Growth of the `L^2` norm over `max(||u_h^0||, 1)` treated as blow-up.
pub const BLOW_UP_GROWTH: f64 = 1e8;

/// Space-time source term `s(t, x)`.
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Projection used for the initial datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProjection {
    /// Left/right Gauss-Radau per cell, chosen by the sign of `f'(u0)`.
    #[default]
    Upwind,
    L2,
}

#[derive(Clone)]
pub struct SchemeConfig {
    pub flux: NumericalFlux,
    pub operator: Arc<FractionalOperator>,
    pub cfl: f64,
    pub final_time: f64,
    pub source: Option<SourceFn>,
    /// Keep a snapshot every `record_every` steps (0 keeps only the endpoints).
    pub record_every: usize,
    /// Overrides the CFL rule with a fixed step (final step still truncated).
    pub fixed_step: Option<f64>,
    pub initial_projection: InitialProjection,
}

impl std::fmt::Debug for SchemeConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemeConfig")
            .field("flux", &self.flux)
            .field("operator", &self.operator)
            .field("cfl", &self.cfl)
            .field("final_time", &self.final_time)
            .field("source", &self.source.is_some())
            .field("record_every", &self.record_every)
            .field("fixed_step", &self.fixed_step)
            .field("initial_projection", &self.initial_projection)
            .finish()
    }
}

impl SchemeConfig {
    pub fn new(flux: NumericalFlux, operator: Arc<FractionalOperator>, final_time: f64) -> Self {
        Self {
            flux,
            operator,
            cfl: DEFAULT_CFL,
            final_time,
            source: None,
            record_every: 0,
            fixed_step: None,
            initial_projection: InitialProjection::Upwind,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.operator.mesh()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl.is_finite()) {
            return Err(invalid(format!("CFL constant must be positive, got {}", self.cfl)));
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(invalid(format!(
                "final time must be nonnegative, got {}",
                self.final_time
            )));
        }
        if let Some(tau) = self.fixed_step {
            if !(tau > 0.0 && tau.is_finite()) {
                return Err(invalid(format!("fixed step must be positive, got {tau}")));
            }
        }
        Ok(())
    }

    /// Nominal step from the CFL rule, or the fixed override.
    pub fn nominal_step(&self) -> f64 {
        self.fixed_step
            .unwrap_or_else(|| cfl_step(self.cfl, self.mesh().h(), self.mesh().degree()))
    }
}

/// `c h` for `k = 1`, `c h^{4/3}` for `k >= 2`.
pub fn cfl_step(cfl: f64, h: f64, degree: usize) -> f64 {
    if degree <= 1 {
        cfl * h
    } else {
        cfl * h.powf(4.0 / 3.0)
    }
}

/// Steps of size `tau` with the last one truncated so that they add up to `final_time`.
pub fn time_steps(final_time: f64, tau: f64) -> Vec<f64> {
    if final_time <= 0.0 {
        return Vec::new();
    }
    let full = (final_time / tau * (1.0 - 1e-12)).floor() as usize;
    let mut steps = vec![tau; full];
    let used: f64 = steps.iter().sum();
    let rest = final_time - used;
    if rest > 1e-14 * final_time || steps.is_empty() {
        steps.push(rest);
    } else if let Some(last) = steps.last_mut() {
        *last += rest;
    }
    steps
}

/// `H_j(phi, basis_{j,m})`.
pub fn convective_form(flux: &NumericalFlux, phi: &DGFunction, j: usize, m: usize) -> f64 {
    let mesh = phi.mesh();
    let rule = mesh.volume_rule();
    let half_h = 0.5 * mesh.h();
    let model = &flux.model;
    let volume: f64 = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&r, &w)| w * half_h * model.f(phi.eval_local(j, r)) * mesh.basis_dx(r)[m])
        .sum();
    let ji = j as isize;
    let right = flux.eval_unchecked(phi.trace(ji + 1, Side::Minus), phi.trace(ji + 1, Side::Plus));
    let left = flux.eval_unchecked(phi.trace(ji, Side::Minus), phi.trace(ji, Side::Plus));
    let norm = ((2 * m + 1) as f64 / mesh.h()).sqrt();
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    volume - right * norm + left * sign * norm
}

/// Precomputed per-mesh tables for the convective operator.
struct ConvectiveTables {
    /// `w_q (h/2) phi_m'(r_q)` by `[q][m]`.
    weighted_dx: Vec<Vec<f64>>,
    /// `phi_m(r_q)` by `[q][m]`.
    values: Vec<Vec<f64>>,
    right: Vec<f64>,
    left: Vec<f64>,
}

impl ConvectiveTables {
    fn new(mesh: &Mesh) -> Self {
        let rule = mesh.volume_rule();
        let half_h = 0.5 * mesh.h();
        let weighted_dx = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&r, &w)| mesh.basis_dx(r).into_iter().map(|d| w * half_h * d).collect())
            .collect();
        let values = rule.nodes.iter().map(|&r| mesh.basis(r)).collect();
        Self {
            weighted_dx,
            values,
            right: mesh.basis(1.0),
            left: mesh.basis(-1.0),
        }
    }
}

/// All `H_j(phi, basis_{j,m})`, cell-major.
pub fn convective_vector(flux: &NumericalFlux, phi: &DGFunction) -> Vec<f64> {
    let mesh = phi.mesh();
    convective_with(&ConvectiveTables::new(mesh), flux, phi.coeffs(), mesh)
}

fn convective_with(t: &ConvectiveTables, flux: &NumericalFlux, u: &[f64], mesh: &Mesh) -> Vec<f64> {
    let cells = mesh.cells();
    let n = mesh.dofs_per_cell();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    // numerical flux at node x_j, j = 0..N-1
    let fluxes: Vec<f64> = (0..cells)
        .map(|j| {
            let prev = (j + cells - 1) % cells;
            let minus = dot(&u[prev * n..(prev + 1) * n], &t.right);
            let plus = dot(&u[j * n..(j + 1) * n], &t.left);
            flux.eval_unchecked(minus, plus)
        })
        .collect();
    let mut out = vec![0.0; u.len()];
    for j in 0..cells {
        let cell = &u[j * n..(j + 1) * n];
        let row = &mut out[j * n..(j + 1) * n];
        for (dx, vals) in t.weighted_dx.iter().zip(&t.values) {
            let fu = flux.model.f(dot(cell, vals));
            axpy(fu, dx, row);
        }
        let right = fluxes[(j + 1) % cells];
        let left = fluxes[j];
        for m in 0..n {
            row[m] += -right * t.right[m] + left * t.left[m];
        }
    }
    out
}

/// `H_j(v, basis_{j,m})` for a continuous function `v`, using its point values as traces.
pub fn exact_convective_vector(model: &FluxModel, v: &dyn Fn(f64) -> f64, mesh: &Mesh) -> Vec<f64> {
    let rule = mesh.projection_rule();
    let half_h = 0.5 * mesh.h();
    let n = mesh.dofs_per_cell();
    let right_basis = mesh.basis(1.0);
    let left_basis = mesh.basis(-1.0);
    let dx: Vec<Vec<f64>> = rule.nodes.iter().map(|&r| mesh.basis_dx(r)).collect();
    let mut out = vec![0.0; mesh.dofs()];
    for j in 0..mesh.cells() {
        let row = &mut out[j * n..(j + 1) * n];
        for (q, (&r, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let fv = model.f(v(mesh.to_physical(j, r)));
            axpy(w * half_h * fv, &dx[q], row);
        }
        let f_right = model.f(v(mesh.node(j as isize + 1)));
        let f_left = model.f(v(mesh.node(j as isize)));
        for m in 0..n {
            row[m] += -f_right * right_basis[m] + f_left * left_basis[m];
        }
    }
    out
}

/// Reusable right-hand-side evaluator `H(u) + B u + S(t)`.
pub struct Stepper<'a> {
    cfg: &'a SchemeConfig,
    tables: ConvectiveTables,
}

impl<'a> Stepper<'a> {
    pub fn new(cfg: &'a SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tables: ConvectiveTables::new(cfg.mesh()),
        })
    }

    fn rhs(&self, u: &[f64], t: f64) -> Vec<f64> {
        let mesh = self.cfg.mesh();
        let mut r = convective_with(&self.tables, &self.cfg.flux, u, mesh);
        let b = self.cfg.operator.apply_coeffs(u);
        axpy(1.0, &b, &mut r);
        if let Some(s) = &self.cfg.source {
            let proj = l2_project(|x| s(t, x), mesh);
            axpy(1.0, proj.coeffs(), &mut r);
        }
        r
    }

    /// One step; returns `(w, u_next)`, the intermediate stage and the update.
    pub fn step_with_stage(&self, u: &DGFunction, t: f64, tau: f64) -> Result<(DGFunction, DGFunction)> {
        let mesh = self.cfg.mesh();
        if !mesh.same_space(u.mesh()) {
            return Err(invalid("DG function does not match the scheme's mesh"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(format!("time step must be positive, got {tau}")));
        }
        let u0 = u.coeffs();
        let mut w = u0.to_vec();
        axpy(tau, &self.rhs(u0, t), &mut w);
        let mut next: Vec<f64> = u0.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
        axpy(0.5 * tau, &self.rhs(&w, t + tau), &mut next);
        Ok((
            DGFunction::from_coeffs(mesh, w)?,
            DGFunction::from_coeffs(mesh, next)?,
        ))
    }

    pub fn step(&self, u: &DGFunction, t: f64, tau: f64) -> Result<DGFunction> {
        self.step_with_stage(u, t, tau).map(|(_, next)| next)
    }
}

/// One two-stage Runge-Kutta step. Non-finite output is reported as blow-up.
pub fn rk2_step(cfg: &SchemeConfig, u: &DGFunction, t: f64, tau: f64) -> Result<DGFunction> {
    let next = Stepper::new(cfg)?.step(u, t, tau)?;
    if !next.is_finite() {
        return Err(blow_up(cfg, 1, t + tau, tau, "non-finite coefficients"));
    }
    Ok(next)
}

fn blow_up(cfg: &SchemeConfig, step: usize, time: f64, tau: f64, what: &str) -> Error {
    let h = cfg.mesh().h();
    Error::BlowUp {
        step,
        time,
        tau,
        cfl: tau / h,
        detail: format!(
            "{what} (h = {h:.3e}, k = {}, configured c = {})",
            cfg.mesh().degree(),
            cfg.cfl
        ),
    }
}

/// Initial datum on the scheme mesh.
pub fn initial_datum(cfg: &SchemeConfig, u0: &dyn Fn(f64) -> f64) -> Result<DGFunction> {
    let mesh = cfg.mesh();
    match cfg.initial_projection {
        InitialProjection::L2 => Ok(l2_project(u0, mesh)),
        InitialProjection::Upwind => {
            let model = cfg.flux.model;
            let fprime = |_: usize, x: f64| model.df(u0(x));
            let choice = upwind_projection_choice(&fprime, mesh, mesh.h(), None, 0)?;
            upwind_project(u0, &choice, mesh)
        }
    }
}

/// Per-step diagnostics and snapshots of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub l2: Vec<f64>,
    pub seminorm: Vec<f64>,
    /// `(step index, time, solution)`.
    pub snapshots: Vec<(usize, f64, DGFunction)>,
}

impl TrajectoryRecord {
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn final_solution(&self) -> &DGFunction {
        &self.snapshots.last().expect("record always holds the initial datum").2
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }

    /// Columns `n,t,mass,l2,seminorm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,t,mass,l2,seminorm\n");
        for n in 0..self.times.len() {
            let _ = writeln!(
                s,
                "{n},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[n], self.mass[n], self.l2[n], self.seminorm[n]
            );
        }
        s
    }

    /// Two columns `x u` per snapshot, blocks separated by a blank line.
    pub fn snapshots_text(&self, points_per_cell: usize) -> String {
        let mut s = String::new();
        for (n, t, u) in &self.snapshots {
            let _ = writeln!(s, "# step {n} t {t:.17e}");
            for (x, v) in u.sample(points_per_cell) {
                let _ = writeln!(s, "{x:.17e} {v:.17e}");
            }
            s.push('\n');
        }
        s
    }
}

/// State handed to a [`run_with`] observer after every step, and once for the initial datum.
pub struct StepView<'a> {
    /// Index of the level held in `u` (0 for the initial datum).
    pub n: usize,
    pub t: f64,
    /// Step that produced this level (0 for the initial datum).
    pub tau: f64,
    pub u: &'a DGFunction,
    /// Intermediate stage of the step that produced this level.
    pub stage: Option<&'a DGFunction>,
}

/// Marches to the final time, calling `observe` on every level.
pub fn run_with(
    cfg: &SchemeConfig,
    u0: &dyn Fn(f64) -> f64,
    mut observe: impl FnMut(&StepView<'_>) -> Result<()>,
) -> Result<TrajectoryRecord> {
    let stepper = Stepper::new(cfg)?;
    let op = &cfg.operator;
    let mut u = initial_datum(cfg, u0)?;
    let steps = time_steps(cfg.final_time, cfg.nominal_step());
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(steps.len() + 1),
        mass: Vec::with_capacity(steps.len() + 1),
        l2: Vec::with_capacity(steps.len() + 1),
        seminorm: Vec::with_capacity(steps.len() + 1),
        snapshots: Vec::new(),
    };
    let record = |rec: &mut TrajectoryRecord, t: f64, u: &DGFunction| -> Result<()> {
        rec.times.push(t);
        rec.mass.push(u.mass());
        rec.l2.push(u.l2_norm());
        rec.seminorm.push(op.seminorm(u)?);
        Ok(())
    };
    record(&mut rec, 0.0, &u)?;
    rec.snapshots.push((0, 0.0, u.clone()));
    observe(&StepView {
        n: 0,
        t: 0.0,
        tau: 0.0,
        u: &u,
        stage: None,
    })?;
    let mut t = 0.0;
    let last = steps.len();
    for (i, &tau) in steps.iter().enumerate() {
        let (w, next) = stepper.step_with_stage(&u, t, tau)?;
        let n = i + 1;
        t = if n == last { cfg.final_time } else { t + tau };
        if !next.is_finite() {
            return Err(blow_up(cfg, n, t, tau, "non-finite coefficients"));
        }
        u = next;
        if u.l2_norm() > BLOW_UP_GROWTH * rec.l2[0].max(1.0) {
            return Err(blow_up(cfg, n, t, tau, "L2 norm grew beyond the blow-up threshold"));
        }
        record(&mut rec, t, &u)?;
        if n == last || (cfg.record_every > 0 && n % cfg.record_every == 0) {
            rec.snapshots.push((n, t, u.clone()));
        }
        observe(&StepView {
            n,
            t,
            tau,
            u: &u,
            stage: Some(&w),
        })?;
    }
    Ok(rec)
}

pub fn run(cfg: &SchemeConfig, u0: &dyn Fn(f64) -> f64) -> Result<TrajectoryRecord> {
    run_with(cfg, u0, |_| Ok(()))
}
