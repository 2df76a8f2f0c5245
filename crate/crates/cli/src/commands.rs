//! The five studies. Each returns an [`Outcome`]: a pass flag, a JSON result
//! and the files to write. Solver failures become failed outcomes so that a
//! summary is still emitted.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use fracdg::analysis::{
    convergence_study, energy_identity_residual, solve_and_measure, temporal_order_study, EocTable, StudySetup,
};
use fracdg::flux::{check_flux_inequalities, FluxModel, NumericalFlux};
use fracdg::fractional::{check_inverse_inequality, FractionalOperator, SpectralOracle};
use fracdg::mesh::{l2_project, DGFunction};
use fracdg::projection::{count_switches, verify_switch_bound};
use fracdg::reference::{ExactField, FourierSolution, ManufacturedSolution, Mode};
use fracdg::scheme::{run, run_with, SourceFn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CheckName, FluxName, RunConfig, SourceKind};

/// Directory for cached operator blocks.
pub const CACHE_ENV: &str = "FRACDG_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    /// Single run on `discretization.N` cells
    Solve,
    /// Error table and orders over `discretization.grids`
    Convergence,
    /// Order in tau on `discretization.N` cells over `discretization.steps`
    TemporalOrder,
    /// Symmetry, definiteness, constants and apply-path checks of the operator
    OperatorCheck,
    /// Flux inequalities, energy identity, switch bound and inverse inequality
    Diagnostics,
}

pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub error: Option<String>,
    pub files: Vec<(String, Vec<u8>)>,
}

type Attempt = fracdg::Result<(bool, Value, Vec<(String, Vec<u8>)>)>;

pub fn execute(study: Study, cfg: &RunConfig) -> Outcome {
    let attempt = match study {
        Study::Solve => solve(cfg),
        Study::Convergence => convergence(cfg),
        Study::TemporalOrder => temporal(cfg),
        Study::OperatorCheck => operator_check(cfg),
        Study::Diagnostics => diagnostics(cfg),
    };
    match attempt {
        Ok((pass, result, files)) => Outcome {
            pass,
            result,
            error: None,
            files,
        },
        Err(e) => Outcome {
            pass: false,
            result: Value::Null,
            error: Some(e.to_string()),
            files: Vec::new(),
        },
    }
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn modes(cfg: &RunConfig) -> Vec<Mode> {
    let p = &cfg.problem;
    let n = p.u0_sin.len().max(p.u0_cos.len());
    (0..n)
        .map(|i| Mode {
            k: i as u32 + 1,
            sin: p.u0_sin.get(i).copied().unwrap_or(0.0),
            cos: p.u0_cos.get(i).copied().unwrap_or(0.0),
        })
        .filter(|m| m.sin != 0.0 || m.cos != 0.0)
        .collect()
}

fn flux(cfg: &RunConfig) -> fracdg::Result<NumericalFlux> {
    let p = &cfg.problem;
    let model = match p.flux {
        FluxName::Linear => FluxModel::linear(p.speed, p.u_min, p.u_max)?,
        FluxName::Burgers => FluxModel::burgers(p.u_min, p.u_max)?,
    };
    Ok(NumericalFlux::new(model, p.numerical_flux))
}

/// Exact solution of the configured problem, if one is known.
fn exact(cfg: &RunConfig) -> fracdg::Result<Option<(Arc<dyn ExactField>, Option<SourceFn>)>> {
    let p = &cfg.problem;
    Ok(match (p.source, p.flux) {
        (SourceKind::Manufactured, _) => {
            let m = ManufacturedSolution::new(p.u0_mean, modes(cfg), p.decay, p.lambda, p.length, flux(cfg)?.model)?;
            let s = m.source_fn();
            Some((Arc::new(m), Some(s)))
        }
        (SourceKind::None, FluxName::Linear) => {
            let f = FourierSolution::new(p.u0_mean, modes(cfg), p.speed, p.lambda, p.length)?;
            Some((Arc::new(f), None))
        }
        (SourceKind::None, FluxName::Burgers) => None,
    })
}

/// The initial datum as a field; only its value at `t = 0` is meaningful.
fn initial_field(cfg: &RunConfig) -> fracdg::Result<Arc<dyn ExactField>> {
    let p = &cfg.problem;
    Ok(Arc::new(FourierSolution::new(p.u0_mean, modes(cfg), 0.0, p.lambda, p.length)?))
}

fn setup(cfg: &RunConfig, field: Arc<dyn ExactField>, source: Option<SourceFn>) -> fracdg::Result<StudySetup> {
    let p = &cfg.problem;
    let mut s = StudySetup::new(flux(cfg)?, p.lambda, p.length, cfg.discretization.k, p.final_time, field);
    s.cfl = cfg.discretization.cfl;
    s.source = source;
    s.cache_dir = cache_dir();
    s.eps_asm = cfg.tolerances.assembly;
    Ok(s)
}

/// Serialized value with run-to-run varying timings removed.
fn without_timings<T: Serialize>(v: &T) -> Value {
    let mut v = serde_json::to_value(v).unwrap_or(Value::Null);
    strip(&mut v);
    v
}

fn strip(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("wall_time_s");
            map.values_mut().for_each(strip);
        }
        Value::Array(items) => items.iter_mut().for_each(strip),
        _ => {}
    }
}

/// Two-column `h error` text for plotting.
fn curve(table: &EocTable) -> Vec<u8> {
    let mut s = String::from("# h error\n");
    for r in &table.rows {
        let _ = writeln!(s, "{:.17e} {:.17e}", r.h, r.error);
    }
    s.into_bytes()
}

fn solve(cfg: &RunConfig) -> Attempt {
    let known = exact(cfg)?;
    let (field, source) = match &known {
        Some((f, s)) => (Arc::clone(f), s.clone()),
        None => (initial_field(cfg)?, None),
    };
    let s = setup(cfg, Arc::clone(&field), source)?;
    let mut scheme = s.scheme(cfg.discretization.cells)?;
    scheme.record_every = cfg.output.snapshot_every;
    let (errors, traj) = if known.is_some() {
        let (record, traj) = solve_and_measure(&scheme, field.as_ref())?;
        (without_timings(&record), traj)
    } else {
        (Value::Null, run(&scheme, &|x| field.value(0.0, x))?)
    };
    let result = json!({
        "N": cfg.discretization.cells,
        "h": scheme.mesh().h(),
        "tau": scheme.nominal_step(),
        "steps": traj.steps(),
        "max_mass_drift": traj.max_mass_drift(),
        "errors": errors,
    });
    let files = vec![
        ("trajectory.csv".to_string(), traj.to_csv().into_bytes()),
        (
            "snapshots.txt".to_string(),
            traj.snapshots_text(cfg.output.points_per_cell).into_bytes(),
        ),
    ];
    Ok((true, result, files))
}

fn convergence(cfg: &RunConfig) -> Attempt {
    let Some((field, source)) = exact(cfg)? else {
        return Err(fracdg::Error::Unsupported(
            "convergence for a nonlinear flux needs problem.source = \"manufactured\"".into(),
        ));
    };
    let s = setup(cfg, field, source)?;
    let report = convergence_study(&s, &cfg.discretization.grids)?;
    let files = vec![
        ("errors.csv".to_string(), report.to_csv().into_bytes()),
        ("curve_l2.txt".to_string(), curve(&report.l2_eoc)),
        ("curve_energy.txt".to_string(), curve(&report.energy_eoc)),
    ];
    Ok((true, without_timings(&report), files))
}

fn temporal(cfg: &RunConfig) -> Attempt {
    let (field, source) = match exact(cfg)? {
        Some(pair) => pair,
        None => (initial_field(cfg)?, None),
    };
    let s = setup(cfg, field, source)?;
    let report = temporal_order_study(&s, cfg.discretization.cells, &cfg.discretization.steps)?;
    let mut plot = String::from("# tau error\n");
    for r in &report.rows {
        let _ = writeln!(plot, "{:.17e} {:.17e}", r.tau, r.error);
    }
    let files = vec![
        ("temporal.csv".to_string(), report.to_csv().into_bytes()),
        ("curve_tau.txt".to_string(), plot.into_bytes()),
    ];
    Ok((true, serde_json::to_value(&report).unwrap_or(Value::Null), files))
}

fn random(op: &FractionalOperator, rng: &mut ChaCha8Rng) -> fracdg::Result<DGFunction> {
    let mesh = op.mesh();
    let c: Vec<f64> = (0..mesh.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DGFunction::from_coeffs(mesh, c)
}

fn operator_check(cfg: &RunConfig) -> Attempt {
    let p = &cfg.problem;
    let t = &cfg.tolerances;
    let oracle = SpectralOracle::new(p.lambda, p.length, 8)?;
    let xi = 2.0 * PI / p.length;
    let target = oracle.seminorm_sq(&|x| (xi * x).sin()).sqrt();
    let s = setup(cfg, initial_field(cfg)?, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut rows = Vec::new();
    let mut pass = true;
    let mut last_error = f64::INFINITY;
    for &n in &cfg.discretization.grids {
        let op = s.operator(n)?;
        let mut symmetry: f64 = 0.0;
        let mut definiteness = f64::NEG_INFINITY;
        let mut paths: f64 = 0.0;
        for _ in 0..8 {
            let (phi, psi) = (random(&op, &mut rng)?, random(&op, &mut rng)?);
            let a = op.bilinear(&phi, &psi)?;
            let b = op.bilinear(&psi, &phi)?;
            symmetry = symmetry.max((a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
            definiteness = definiteness.max(op.bilinear(&phi, &phi)? / phi.l2_norm().powi(2));
            let dense = op.apply_dense(&phi)?;
            let fast = op.apply_fast(&phi)?;
            let diff = dense.iter().zip(&fast).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            paths = paths.max(diff / phi.l2_norm());
        }
        let one = DGFunction::constant(op.mesh(), 1.0);
        let constants = op.apply(&one)?.iter().map(|v| v * v).sum::<f64>().sqrt() / one.l2_norm();
        let sine = l2_project(|x: f64| (xi * x).sin(), op.mesh());
        let sine_error = (op.seminorm(&sine)? - target).abs();
        let ok = symmetry <= t.operator_symmetry
            && definiteness <= t.operator_symmetry
            && constants <= t.operator_constants
            && paths <= t.operator_paths
            && sine_error < last_error;
        pass &= ok;
        last_error = sine_error;
        rows.push(json!({
            "N": n,
            "h": op.mesh().h(),
            "symmetry": symmetry,
            "max_rayleigh": definiteness,
            "constants": constants,
            "paths": paths,
            "sine_seminorm_error": sine_error,
            "assembly": op.diagnostics(),
            "pass": ok,
        }));
    }
    Ok((pass, json!({ "sine_seminorm": target, "grids": rows, "pass": pass }), Vec::new()))
}

#[derive(Debug, Clone, Serialize)]
struct CheckResult {
    name: CheckName,
    /// `pass`, `fail` or `skipped`.
    status: &'static str,
    /// Distance to the failure threshold; negative when failing.
    margin: Option<f64>,
    detail: String,
    report: Value,
}

impl CheckResult {
    fn from_margin(name: CheckName, margin: f64, detail: String, report: Value) -> Self {
        Self::judged(name, margin >= 0.0, margin, detail, report)
    }

    fn judged(name: CheckName, pass: bool, margin: f64, detail: String, report: Value) -> Self {
        Self {
            name,
            status: if pass { "pass" } else { "fail" },
            margin: Some(margin),
            detail,
            report,
        }
    }

    fn failed(name: CheckName, e: fracdg::Error) -> Self {
        Self {
            name,
            status: "fail",
            margin: None,
            detail: e.to_string(),
            report: Value::Null,
        }
    }

    fn skipped(name: CheckName, why: &str) -> Self {
        Self {
            name,
            status: "skipped",
            margin: None,
            detail: why.to_string(),
            report: Value::Null,
        }
    }
}

fn diagnostics(cfg: &RunConfig) -> Attempt {
    let results: Vec<CheckResult> = cfg
        .diagnostics
        .checks
        .iter()
        .map(|&name| {
            let r = match name {
                CheckName::FluxInequalities => flux_inequalities(cfg),
                CheckName::EnergyIdentity => energy_identity(cfg),
                CheckName::SwitchBound => switch_bound(cfg),
                CheckName::InverseInequality => inverse_inequality(cfg),
            };
            r.unwrap_or_else(|e| CheckResult::failed(name, e))
        })
        .collect();
    let pass = results.iter().all(|r| r.status != "fail");
    Ok((pass, json!({ "checks": results, "pass": pass }), Vec::new()))
}

fn flux_inequalities(cfg: &RunConfig) -> fracdg::Result<CheckResult> {
    let rep = check_flux_inequalities(&flux(cfg)?, cfg.tolerances.flux_samples, cfg.run.seed)?;
    let margin = rep.checks.iter().map(|c| c.worst_margin).fold(f64::INFINITY, f64::min);
    let violations: usize = rep.checks.iter().map(|c| c.violations).sum();
    let detail = format!("{} samples, {violations} violations", rep.samples);
    // The sampler applies its own round-off slack, so its verdict decides.
    Ok(CheckResult::judged(
        CheckName::FluxInequalities,
        rep.pass,
        margin,
        detail,
        serde_json::to_value(&rep).unwrap_or(Value::Null),
    ))
}

fn energy_identity(cfg: &RunConfig) -> fracdg::Result<CheckResult> {
    let p = &cfg.problem;
    if p.flux != FluxName::Linear || p.source != SourceKind::None {
        return Ok(CheckResult::skipped(
            CheckName::EnergyIdentity,
            "needs a linear flux without source",
        ));
    }
    let sol = FourierSolution::new(p.u0_mean, modes(cfg), p.speed, p.lambda, p.length)?;
    let scheme = setup(cfg, Arc::new(sol.clone()), None)?.scheme(cfg.discretization.cells)?;
    let rep = energy_identity_residual(&scheme, &sol)?;
    let detail = format!("{} steps, max relative residual {:e}", rep.steps.len(), rep.max_relative);
    let summary = json!({
        "steps": rep.steps.len(),
        "max_relative": rep.max_relative,
        "switching_cells": rep.switching_cells,
    });
    Ok(CheckResult::from_margin(
        CheckName::EnergyIdentity,
        cfg.tolerances.energy_identity - rep.max_relative,
        detail,
        summary,
    ))
}

/// Switch counts along the configured run against the bound with `alpha = 2`;
/// `C_{t,2}` is estimated from second time differences of `f'` at cell means.
fn switch_bound(cfg: &RunConfig) -> fracdg::Result<CheckResult> {
    let (field, source) = match exact(cfg)? {
        Some(pair) => pair,
        None => (initial_field(cfg)?, None),
    };
    let scheme = setup(cfg, Arc::clone(&field), source)?.scheme(cfg.discretization.cells)?;
    let u0 = |x: f64| field.value(0.0, x);
    let choices = fracdg::analysis::choices_along_run(&scheme, &u0)?;
    let counter = count_switches(&choices)?;

    let model = scheme.flux.model;
    let cells = scheme.mesh().cells();
    let mut hist: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut c_t2: f64 = 0.0;
    run_with(&scheme, &u0, |v| {
        let speeds: Vec<f64> = (0..cells).map(|j| model.df(v.u.cell_mean(j))).collect();
        hist.push((v.t, speeds));
        if let [a, b, c] = &hist[hist.len().saturating_sub(3)..] {
            let (t1, t2) = (b.0 - a.0, c.0 - b.0);
            for j in 0..cells {
                let d2 = 2.0 * ((c.1[j] - b.1[j]) / t2 - (b.1[j] - a.1[j]) / t1) / (t1 + t2);
                c_t2 = c_t2.max(d2.abs());
            }
            hist.remove(0);
        }
        Ok(())
    })?;
    let rep = verify_switch_bound(&counter, cfg.problem.final_time, scheme.mesh().h(), 2, c_t2)?;
    let detail = format!("max #O_j {} vs bound {:.3}", rep.max_count, rep.bound);
    Ok(CheckResult::from_margin(
        CheckName::SwitchBound,
        rep.bound - rep.max_count as f64,
        detail,
        serde_json::to_value(&rep).unwrap_or(Value::Null),
    ))
}

/// Inverse-inequality ratios on `N/4`, `N/2` and `N`; the largest ratio on the
/// finer grids may exceed the coarsest by at most `tolerances.inverse_growth`.
fn inverse_inequality(cfg: &RunConfig) -> fracdg::Result<CheckResult> {
    let n = cfg.discretization.cells;
    let mut grids: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&g| g >= 2).collect();
    grids.dedup();
    if grids.len() < 2 {
        return Err(fracdg::Error::InvalidArgument(
            "inverse-inequality check needs discretization.N >= 4".into(),
        ));
    }
    let s = setup(cfg, initial_field(cfg)?, None)?;
    let mut reports = Vec::with_capacity(grids.len());
    for &g in &grids {
        let op = s.operator(g)?;
        reports.push(check_inverse_inequality(&op, cfg.tolerances.inverse_samples, cfg.run.seed)?);
    }
    let coarse = reports[0].max_ratio;
    let fine = reports[1..].iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let growth = fine / coarse;
    let detail = format!("fine/coarse max ratio {growth:.4} (limit {})", cfg.tolerances.inverse_growth);
    Ok(CheckResult::from_margin(
        CheckName::InverseInequality,
        cfg.tolerances.inverse_growth - growth,
        detail,
        json!({ "grids": reports, "growth": growth }),
    ))
}
