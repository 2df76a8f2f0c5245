//! Error norms, convergence orders, the energy-identity residual and the
//! convergence / temporal-order study drivers.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::flux::NumericalFlux;
use crate::fractional::{load_or_assemble, FractionalOperator, DEFAULT_ASSEMBLY_TOLERANCE};
use crate::mesh::{dot, l2_project, DGFunction, Mesh};
use crate::projection::{upwind_project, upwind_projection_choice, ProjectionChoice};
use crate::reference::{ExactField, FourierSolution};
use crate::scheme::{
    convective_vector, exact_convective_vector, initial_datum, run_with, time_steps, SchemeConfig,
    SourceFn, Stepper,
};

/// Fixed CSV header of error tables.
pub const ERROR_CSV_HEADER: &str = "h,tau,N,k,lambda,l2_error,energy_error,jump,eoc";

/// Fixed CSV header of temporal-order tables.
pub const TEMPORAL_CSV_HEADER: &str = "steps,tau,N,error,eoc";

/// `sqrt(sum_j [[u]]_j^2)`.
pub fn jump_seminorm(u: &DGFunction) -> f64 {
    (0..u.mesh().cells() as isize)
        .map(|j| u.jump(j).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `||u(t) - u_h||` by per-cell Gauss quadrature with `points` points.
pub fn l2_error(exact: &dyn ExactField, t: f64, u: &DGFunction, points: usize) -> f64 {
    crate::mesh::l2_distance(|x| exact.value(t, x), u, points)
}

/// `|u(t) - u_h|^2` in the `H^{lambda/2}` seminorm, from
/// `|u|^2 + 2 (g[u], u_h) + u_h^T B u_h` with the exact parts in closed form.
pub fn seminorm_error_sq(exact: &dyn ExactField, t: f64, u: &DGFunction, op: &FractionalOperator) -> Result<f64> {
    let g = l2_project(|x| exact.fractional(t, x), u.mesh());
    let cross = dot(g.coeffs(), u.coeffs());
    let discrete = op.quadratic_coeffs(u.coeffs())?;
    Ok((exact.seminorm_sq(t) + 2.0 * cross + discrete).max(0.0))
}

/// Errors of one run against an exact field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub h: f64,
    pub tau: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub k: usize,
    pub lambda: f64,
    pub steps: usize,
    pub l2_error: f64,
    /// `max_n ( ||e^n|| + (sum_{m<n} tau_m |e^m|^2)^{1/2} )`.
    pub energy_error: f64,
    /// Level where the energy error is attained.
    pub energy_level: usize,
    /// `||e^n||` at that level.
    pub l2_at_energy_level: f64,
    pub jump: f64,
    pub wall_time_s: f64,
}

/// Builds the energy error from the levels of a run.
pub struct ErrorAccumulator<'a> {
    exact: &'a dyn ExactField,
    op: &'a FractionalOperator,
    points: usize,
    sum: f64,
    prev_semi_sq: f64,
    best: (f64, usize, f64),
    last_l2: f64,
    levels: usize,
}

impl<'a> ErrorAccumulator<'a> {
    pub fn new(exact: &'a dyn ExactField, op: &'a FractionalOperator) -> Self {
        let points = op.mesh().degree() + 8;
        Self {
            exact,
            op,
            points,
            sum: 0.0,
            prev_semi_sq: 0.0,
            best: (-1.0, 0, 0.0),
            last_l2: 0.0,
            levels: 0,
        }
    }

    /// Feeds level `n` at time `t`; `tau` is the step from the previous level.
    pub fn push(&mut self, n: usize, t: f64, tau: f64, u: &DGFunction) -> Result<()> {
        if n != self.levels {
            return Err(invalid(format!(
                "error accumulation expects level {}, got {n}",
                self.levels
            )));
        }
        if n > 0 {
            self.sum += tau * self.prev_semi_sq;
        }
        let l2 = l2_error(self.exact, t, u, self.points);
        let energy = l2 + self.sum.sqrt();
        if energy > self.best.0 {
            self.best = (energy, n, l2);
        }
        self.prev_semi_sq = seminorm_error_sq(self.exact, t, u, self.op)?;
        self.last_l2 = l2;
        self.levels += 1;
        Ok(())
    }

    pub fn energy_error(&self) -> (f64, usize, f64) {
        self.best
    }

    pub fn last_l2(&self) -> f64 {
        self.last_l2
    }
}

/// Error record from a contiguous sequence of levels `(n, t, u)`.
pub fn error_norms(
    levels: &[(usize, f64, DGFunction)],
    exact: &dyn ExactField,
    op: &FractionalOperator,
) -> Result<ErrorRecord> {
    let start = Instant::now();
    if levels.is_empty() {
        return Err(invalid("no snapshots"));
    }
    let mut acc = ErrorAccumulator::new(exact, op);
    let mut t_prev = 0.0;
    for (i, (n, t, u)) in levels.iter().enumerate() {
        if *n != i {
            return Err(invalid(format!(
                "snapshots must cover every level; expected {i}, found {n}"
            )));
        }
        acc.push(*n, *t, t - t_prev, u)?;
        t_prev = *t;
    }
    let (energy, level, l2_at) = acc.energy_error();
    let mesh = op.mesh();
    let last = &levels[levels.len() - 1];
    let tau = if levels.len() > 1 { levels[1].1 - levels[0].1 } else { 0.0 };
    Ok(ErrorRecord {
        h: mesh.h(),
        tau,
        cells: mesh.cells(),
        k: mesh.degree(),
        lambda: op.lambda(),
        steps: levels.len() - 1,
        l2_error: acc.last_l2(),
        energy_error: energy,
        energy_level: level,
        l2_at_energy_level: l2_at,
        jump: jump_seminorm(&last.2),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub h: f64,
    pub error: f64,
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub rows: Vec<EocRow>,
}

impl EocTable {
    pub fn last_eoc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc)
    }
}

/// `eoc_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`; `h` must strictly decrease.
pub fn eoc(points: &[(f64, f64)]) -> Result<EocTable> {
    if points.is_empty() {
        return Err(invalid("eoc needs at least one row"));
    }
    if points.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(invalid("mesh sizes must be strictly decreasing"));
    }
    let rows = points
        .iter()
        .enumerate()
        .map(|(i, &(h, e))| EocRow {
            h,
            error: e,
            eoc: (i > 0).then(|| {
                let (h0, e0) = points[i - 1];
                (e0 / e).ln() / (h0 / h).ln()
            }),
        })
        .collect();
    Ok(EocTable { rows })
}

/// Problem definition shared by the study drivers.
#[derive(Clone)]
pub struct StudySetup {
    pub flux: NumericalFlux,
    pub lambda: f64,
    pub length: f64,
    pub degree: usize,
    pub cfl: f64,
    pub final_time: f64,
    pub exact: Arc<dyn ExactField>,
    pub source: Option<SourceFn>,
    pub cache_dir: Option<PathBuf>,
    pub eps_asm: f64,
}

impl std::fmt::Debug for StudySetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StudySetup")
            .field("flux", &self.flux)
            .field("lambda", &self.lambda)
            .field("length", &self.length)
            .field("degree", &self.degree)
            .field("cfl", &self.cfl)
            .field("final_time", &self.final_time)
            .field("cache_dir", &self.cache_dir)
            .finish()
    }
}

impl StudySetup {
    pub fn new(
        flux: NumericalFlux,
        lambda: f64,
        length: f64,
        degree: usize,
        final_time: f64,
        exact: Arc<dyn ExactField>,
    ) -> Self {
        Self {
            flux,
            lambda,
            length,
            degree,
            cfl: crate::scheme::DEFAULT_CFL,
            final_time,
            exact,
            source: None,
            cache_dir: None,
            eps_asm: DEFAULT_ASSEMBLY_TOLERANCE,
        }
    }

    pub fn operator(&self, cells: usize) -> Result<Arc<FractionalOperator>> {
        let mesh = Mesh::shared(self.length, cells, self.degree)?;
        load_or_assemble(self.cache_dir.as_deref(), &mesh, self.lambda, self.eps_asm).map(Arc::new)
    }

    pub fn scheme(&self, cells: usize) -> Result<SchemeConfig> {
        let mut cfg = SchemeConfig::new(self.flux, self.operator(cells)?, self.final_time);
        cfg.cfl = self.cfl;
        cfg.source = self.source.clone();
        Ok(cfg)
    }
}

/// Runs one grid and measures its errors along the way.
pub fn solve_and_measure(cfg: &SchemeConfig, exact: &dyn ExactField) -> Result<(ErrorRecord, crate::scheme::TrajectoryRecord)> {
    let start = Instant::now();
    let op = Arc::clone(&cfg.operator);
    let mut acc = ErrorAccumulator::new(exact, &op);
    let u0 = |x: f64| exact.value(0.0, x);
    let rec = run_with(cfg, &u0, |v| acc.push(v.n, v.t, v.tau, v.u))?;
    let (energy, level, l2_at) = acc.energy_error();
    let mesh = cfg.mesh();
    let record = ErrorRecord {
        h: mesh.h(),
        tau: cfg.nominal_step(),
        cells: mesh.cells(),
        k: mesh.degree(),
        lambda: op.lambda(),
        steps: rec.steps(),
        l2_error: acc.last_l2(),
        energy_error: energy,
        energy_level: level,
        l2_at_energy_level: l2_at,
        jump: jump_seminorm(rec.final_solution()),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((record, rec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub records: Vec<ErrorRecord>,
    pub l2_eoc: EocTable,
    pub energy_eoc: EocTable,
    /// Largest total-mass drift over all grids.
    pub max_mass_drift: f64,
}

impl ConvergenceReport {
    /// Rows under [`ERROR_CSV_HEADER`]; the `eoc` column is the energy-norm order.
    pub fn to_csv(&self) -> String {
        let mut s = format!("{ERROR_CSV_HEADER}\n");
        for (r, e) in self.records.iter().zip(&self.energy_eoc.rows) {
            let eoc = e.eoc.map(|v| format!("{v:.17e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{},{},{},{:.17e},{:.17e},{:.17e},{eoc}",
                r.h, r.tau, r.cells, r.k, r.lambda, r.l2_error, r.energy_error, r.jump
            );
        }
        s
    }
}

/// Runs every grid and tabulates the orders. Aborts with the grid named on failure.
pub fn convergence_study(setup: &StudySetup, grids: &[usize]) -> Result<ConvergenceReport> {
    if grids.is_empty() {
        return Err(invalid("grid list is empty"));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid list must be strictly increasing"));
    }
    let mut records = Vec::with_capacity(grids.len());
    let mut drift: f64 = 0.0;
    for &n in grids {
        let cfg = setup.scheme(n)?;
        let (rec, traj) = solve_and_measure(&cfg, setup.exact.as_ref()).map_err(|e| match e {
            Error::BlowUp { step, time, tau, cfl, detail } => Error::BlowUp {
                step,
                time,
                tau,
                cfl,
                detail: format!("grid N = {n}: {detail}"),
            },
            other => other,
        })?;
        if setup.source.is_none() {
            drift = drift.max(traj.max_mass_drift());
        }
        records.push(rec);
    }
    let l2: Vec<(f64, f64)> = records.iter().map(|r| (r.h, r.l2_error)).collect();
    let en: Vec<(f64, f64)> = records.iter().map(|r| (r.h, r.energy_error)).collect();
    Ok(ConvergenceReport {
        l2_eoc: eoc(&l2)?,
        energy_eoc: eoc(&en)?,
        records,
        max_mass_drift: drift,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub steps: usize,
    pub tau: f64,
    pub error: f64,
    pub eoc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalReport {
    pub cells: usize,
    pub reference_steps: [usize; 2],
    pub rows: Vec<TemporalRow>,
}

impl TemporalReport {
    /// Rows under [`TEMPORAL_CSV_HEADER`].
    pub fn to_csv(&self) -> String {
        let mut s = format!("{TEMPORAL_CSV_HEADER}\n");
        for r in &self.rows {
            let eoc = r.eoc.map(|v| format!("{v:.17e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.17e},{},{:.17e},{eoc}", r.steps, r.tau, self.cells, r.error);
        }
        s
    }
}

/// Final-time solution with `steps` equal steps.
fn solve_fixed(cfg: &SchemeConfig, u0: &dyn Fn(f64) -> f64, steps: usize) -> Result<DGFunction> {
    let mut c = cfg.clone();
    c.fixed_step = Some(cfg.final_time / steps as f64);
    c.record_every = 0;
    Ok(crate::scheme::run(&c, u0)?.final_solution().clone())
}

/// Errors for `tau = T / steps` against the Richardson extrapolation
/// `(4 u_{tau_ref/2} - u_{tau_ref}) / 3` of two much finer runs.
pub fn temporal_order_study(setup: &StudySetup, cells: usize, steps: &[usize]) -> Result<TemporalReport> {
    if steps.is_empty() || steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("step counts must be nonempty and strictly increasing"));
    }
    let cfg = setup.scheme(cells)?;
    let exact = Arc::clone(&setup.exact);
    let u0 = move |x: f64| exact.value(0.0, x);
    let finest = *steps.last().unwrap();
    let reference_steps = [4 * finest, 8 * finest];
    let coarse_ref = solve_fixed(&cfg, &u0, reference_steps[0])?;
    let fine_ref = solve_fixed(&cfg, &u0, reference_steps[1])?;
    let extrapolated: Vec<f64> = fine_ref
        .coeffs()
        .iter()
        .zip(coarse_ref.coeffs())
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect();
    let mut rows: Vec<TemporalRow> = Vec::with_capacity(steps.len());
    for &s in steps {
        let u = solve_fixed(&cfg, &u0, s)?;
        let err = u
            .coeffs()
            .iter()
            .zip(&extrapolated)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let tau = setup.final_time / s as f64;
        let eoc = rows.last().map(|p| (p.error / err).ln() / (p.tau / tau).ln());
        rows.push(TemporalRow { steps: s, tau, error: err, eoc });
    }
    Ok(TemporalReport {
        cells,
        reference_steps,
        rows,
    })
}

/// Both sides of the energy identity for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentityStep {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Largest absolute value among the participating terms.
    pub scale: f64,
    pub residual: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentityReport {
    pub steps: Vec<EnergyIdentityStep>,
    pub max_relative: f64,
    /// Cells whose projection side changed at least once.
    pub switching_cells: usize,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Per-step residual of the discrete-error energy identity along a run of the
/// scheme for a linear flux with an exact Fourier solution. The projections
/// follow the upwind choice with threshold `h` and reuse.
pub fn energy_identity_residual(cfg: &SchemeConfig, sol: &FourierSolution) -> Result<EnergyIdentityReport> {
    let model = cfg.flux.model;
    let speed = match model.kind {
        crate::flux::FluxKind::Linear { speed } => speed,
        _ => {
            return Err(Error::Unsupported(
                "energy identity check needs a linear flux with a Fourier-exact solution".into(),
            ))
        }
    };
    if cfg.source.is_some() {
        return Err(Error::Unsupported("energy identity check is source-free".into()));
    }
    if (speed - sol.speed).abs() > 0.0 || (cfg.operator.lambda() - sol.lambda).abs() > 0.0 {
        return Err(invalid("Fourier solution does not match the scheme's speed or lambda"));
    }
    let mesh = Arc::clone(cfg.mesh());
    if (mesh.length() - sol.length).abs() > 1e-14 * sol.length {
        return Err(invalid("Fourier solution does not match the domain length"));
    }
    let op = &cfg.operator;
    let stepper = Stepper::new(cfg)?;
    let h = mesh.h();
    let fprime = |_: usize, _: f64| speed;

    let u0 = |x: f64| sol.value(0.0, x);
    let mut uh = initial_datum(cfg, &u0)?;
    let mut choice = upwind_projection_choice(&fprime, &mesh, h, None, 0)?;
    let mut choices = vec![choice.clone()];
    let mut t = 0.0;
    let mut out = Vec::new();
    let steps = time_steps(cfg.final_time, cfg.nominal_step());
    for (i, &tau) in steps.iter().enumerate() {
        let (wh, uh_next) = stepper.step_with_stage(&uh, t, tau)?;
        let t1 = t + tau;
        let next_choice = upwind_projection_choice(&fprime, &mesh, h, Some(&choice), i + 1)?;

        let u_fn = |x: f64| sol.value(t, x);
        let w_fn = |x: f64| sol.value(t, x) + tau * sol.time_derivative(t, x);
        let u1_fn = |x: f64| sol.value(t1, x);
        let pu = l2_project(u_fn, &mesh);
        let pw = l2_project(w_fn, &mesh);
        let pu1 = l2_project(u1_fn, &mesh);
        let gu = l2_project(|x| sol.fractional(t, x), &mesh);
        let gw = l2_project(
            |x| sol.fractional(t, x) + tau * sol.fractional_time_derivative(t, x),
            &mesh,
        );
        let hx_u = exact_convective_vector(&model, &u_fn, &mesh);
        let hx_w = exact_convective_vector(&model, &w_fn, &mesh);
        let pi_u = upwind_project(&u_fn, &choice, &mesh)?;
        let pi_w = upwind_project(&w_fn, &choice, &mesh)?;
        let pi_u1 = upwind_project(&u1_fn, &next_choice, &mesh)?;

        let xi_h = sub(uh.coeffs(), pi_u.coeffs());
        let zeta_h = sub(wh.coeffs(), pi_w.coeffs());
        let xi_h1 = sub(uh_next.coeffs(), pi_u1.coeffs());
        // projections of xi_pi, zeta_pi, xi_pi^{n+1} onto V_h
        let xi_pi = sub(pu.coeffs(), pi_u.coeffs());
        let zeta_pi = sub(pw.coeffs(), pi_w.coeffs());
        let xi_pi1 = sub(pu1.coeffs(), pi_u1.coeffs());
        // stage-2 defect E^n
        let e_n: Vec<f64> = (0..mesh.dofs())
            .map(|r| {
                pu1.coeffs()[r]
                    - 0.5 * (pu.coeffs()[r] + pw.coeffs()[r])
                    - 0.5 * tau * (hx_w[r] + gw.coeffs()[r])
            })
            .collect();

        let h_uh = convective_vector(&cfg.flux, &uh);
        let h_wh = convective_vector(&cfg.flux, &wh);
        let k_vec: Vec<f64> = (0..mesh.dofs())
            .map(|r| zeta_pi[r] - xi_pi[r] + tau * (h_uh[r] - hx_u[r]))
            .collect();
        let l_vec: Vec<f64> = (0..mesh.dofs())
            .map(|r| {
                2.0 * xi_pi1[r] - zeta_pi[r] - xi_pi[r] - 2.0 * e_n[r]
                    + tau * (h_wh[r] - hx_w[r])
            })
            .collect();
        let d_zeta = dot(gw.coeffs(), &zeta_h) - dot(&zeta_h, &op.apply_coeffs(pi_w.coeffs()));
        let d_xi = dot(gu.coeffs(), &xi_h) - dot(&xi_h, &op.apply_coeffs(pi_u.coeffs()));
        let semi_xi = op.seminorm_sq_coeffs(&xi_h)?;
        let semi_zeta = op.seminorm_sq_coeffs(&zeta_h)?;

        let n_xi1 = dot(&xi_h1, &xi_h1);
        let n_xi = dot(&xi_h, &xi_h);
        let diff = sub(&xi_h1, &zeta_h);
        let terms = [
            n_xi1,
            n_xi,
            dot(&diff, &diff),
            dot(&k_vec, &xi_h),
            dot(&l_vec, &zeta_h),
            tau * d_zeta,
            tau * d_xi,
            tau * semi_xi,
            tau * semi_zeta,
        ];
        let lhs = terms[0] - terms[1];
        let rhs = terms[2] + terms[3] + terms[4] - terms[5] - terms[6] - terms[7] - terms[8];
        let scale = terms.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let residual = (lhs - rhs).abs();
        out.push(EnergyIdentityStep {
            n: i,
            lhs,
            rhs,
            scale,
            residual,
            relative: if scale > 0.0 { residual / scale } else { 0.0 },
        });

        uh = uh_next;
        choice = next_choice;
        choices.push(choice.clone());
        t = t1;
    }
    let switching_cells = crate::projection::count_switches(&choices)?
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .count();
    let max_relative = out.iter().map(|s| s.relative).fold(0.0, f64::max);
    Ok(EnergyIdentityReport {
        steps: out,
        max_relative,
        switching_cells,
    })
}

/// Projection choices along a run, sampling `f'(u_h^n)` cell-locally.
pub fn choices_along_run(cfg: &SchemeConfig, u0: &dyn Fn(f64) -> f64) -> Result<Vec<ProjectionChoice>> {
    let model = cfg.flux.model;
    let mesh = Arc::clone(cfg.mesh());
    let h = mesh.h();
    let mut choices: Vec<ProjectionChoice> = Vec::new();
    run_with(cfg, u0, |v| {
        let fprime = |j: usize, x: f64| {
            let r = (2.0 * (x - mesh.node(j as isize)) / h - 1.0).clamp(-1.0, 1.0);
            model.df(v.u.eval_local(j, r))
        };
        let next = upwind_projection_choice(&fprime, &mesh, h, choices.last(), v.n)?;
        choices.push(next);
        Ok(())
    })?;
    Ok(choices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{FluxModel, NumericalFluxKind};
    use crate::reference::Mode;
    use std::f64::consts::PI;

    #[test]
    fn eoc_of_simple_sequences() {
        let t = eoc(&[(0.1, 1e-2), (0.05, 2.5e-3)]).unwrap();
        assert_eq!(t.rows[0].eoc, None);
        assert!((t.rows[1].eoc.unwrap() - 2.0).abs() < 1e-12);
        let flat = eoc(&[(0.2, 3.0), (0.1, 3.0), (0.05, 3.0)]).unwrap();
        assert!(flat.rows.iter().skip(1).all(|r| r.eoc.unwrap().abs() < 1e-15));
        let pts: Vec<(f64, f64)> = (0..5).map(|i| {
            let h = 0.5f64.powi(i);
            (h, h.powf(2.25))
        }).collect();
        let p = eoc(&pts).unwrap();
        assert!(p.rows.iter().skip(1).all(|r| (r.eoc.unwrap() - 2.25).abs() < 1e-12));
        assert!(eoc(&[(0.1, 1.0), (0.1, 0.5)]).is_err());
        assert!(eoc(&[(0.1, 1.0)]).unwrap().rows[0].eoc.is_none());
    }

    #[test]
    fn jump_of_continuous_function_vanishes() {
        let mesh = Mesh::shared(1.0, 10, 1).unwrap();
        let hat = crate::projection::gauss_radau_project(
            &|x: f64| 1.0 - (2.0 * x - 1.0).abs(),
            &mesh,
            crate::projection::RadauSide::Right,
        );
        assert!(jump_seminorm(&hat) < 1e-12);
    }

    fn linear_setup(cells: usize) -> (SchemeConfig, FourierSolution) {
        let sol = FourierSolution::new(0.0, vec![Mode::sin(1, 1.0), Mode::cos(2, 0.5)], 1.0, 0.5, 2.0 * PI).unwrap();
        let flux = NumericalFlux::new(FluxModel::linear(1.0, -3.0, 3.0).unwrap(), NumericalFluxKind::Godunov);
        let mesh = Mesh::shared(2.0 * PI, cells, 1).unwrap();
        let op = FractionalOperator::assemble(&mesh, 0.5, 1e-10).unwrap();
        (SchemeConfig::new(flux, Arc::new(op), 0.2), sol)
    }

    #[test]
    fn exact_projection_has_tiny_errors() {
        // exact solution inside V_h: constant in time and space
        let mesh = Mesh::shared(1.0, 8, 1).unwrap();
        let op = FractionalOperator::assemble(&mesh, 0.5, 1e-10).unwrap();
        let sol = FourierSolution::new(0.7, vec![], 0.0, 0.5, 1.0).unwrap();
        let levels: Vec<_> = (0..3).map(|n| (n, 0.1 * n as f64, DGFunction::constant(&mesh, 0.7))).collect();
        let r = error_norms(&levels, &sol, &op).unwrap();
        assert!(r.l2_error < 1e-12 && r.energy_error < 1e-12 && r.jump < 1e-12);
        let gap = vec![levels[0].clone(), levels[2].clone()];
        assert!(error_norms(&gap, &sol, &op).is_err());
    }

    #[test]
    fn energy_error_dominates_l2_error() {
        let (cfg, sol) = linear_setup(16);
        let (rec, _) = solve_and_measure(&cfg, &sol).unwrap();
        assert!(rec.energy_error.is_finite());
        assert!(rec.energy_error >= rec.l2_at_energy_level);
    }

    #[test]
    fn energy_identity_holds_to_round_off() {
        let (cfg, sol) = linear_setup(16);
        let rep = energy_identity_residual(&cfg, &sol).unwrap();
        assert!(!rep.steps.is_empty());
        assert!(rep.max_relative < 1e-8, "{}", rep.max_relative);
    }

    #[test]
    fn energy_identity_rejects_burgers() {
        let (mut cfg, sol) = linear_setup(8);
        cfg.flux = NumericalFlux::new(FluxModel::burgers(-2.0, 2.0).unwrap(), NumericalFluxKind::Godunov);
        assert!(matches!(energy_identity_residual(&cfg, &sol), Err(Error::Unsupported(_))));
    }
}
