//! Run configuration: a sectioned TOML file of flat `key = value` pairs,
//! overridden by command-line flags, then validated and completed with defaults.

use std::path::{Path, PathBuf};

use fracdg::flux::NumericalFluxKind;
use fracdg::fractional::{DEFAULT_ASSEMBLY_TOLERANCE, MAX_OPERATOR_DEGREE};
use fracdg::scheme::DEFAULT_CFL;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FluxName {
    Linear,
    Burgers,
}

/// Named initial data; `modes` reads `u0_mean`, `u0_sin` and `u0_cos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPreset {
    /// `sin x + 0.5 cos 2x`
    Battery,
    /// `sin x`
    Sine,
    /// `0.5 + 0.25 sin x`
    Bump,
    Modes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    None,
    /// Source that makes `mean + e^{-decay t} (modes)` an exact solution.
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    FluxInequalities,
    EnergyIdentity,
    SwitchBound,
    InverseInequality,
}

pub const ALL_CHECKS: [CheckName; 4] = [
    CheckName::FluxInequalities,
    CheckName::EnergyIdentity,
    CheckName::SwitchBound,
    CheckName::InverseInequality,
];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    flux: Option<FluxName>,
    speed: Option<f64>,
    numerical_flux: Option<NumericalFluxKind>,
    u_min: Option<f64>,
    u_max: Option<f64>,
    lambda: Option<f64>,
    length: Option<f64>,
    u0: Option<InitialPreset>,
    u0_mean: Option<f64>,
    u0_sin: Option<Vec<f64>>,
    u0_cos: Option<Vec<f64>>,
    source: Option<SourceKind>,
    decay: Option<f64>,
    #[serde(rename = "T")]
    final_time: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscretization {
    k: Option<usize>,
    #[serde(rename = "N")]
    cells: Option<usize>,
    grids: Option<Vec<usize>>,
    cfl: Option<f64>,
    steps: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    snapshot_every: Option<usize>,
    points_per_cell: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    assembly: Option<f64>,
    energy_identity: Option<f64>,
    inverse_growth: Option<f64>,
    flux_samples: Option<usize>,
    inverse_samples: Option<usize>,
    operator_symmetry: Option<f64>,
    operator_constants: Option<f64>,
    operator_paths: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiagnostics {
    checks: Option<Vec<CheckName>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    problem: RawProblem,
    #[serde(default)]
    discretization: RawDiscretization,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    tolerances: RawTolerances,
    #[serde(default)]
    diagnostics: RawDiagnostics,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub flux: Option<FluxName>,
    pub lambda: Option<f64>,
    pub k: Option<usize>,
    pub grids: Option<Vec<usize>>,
    pub cfl: Option<f64>,
    pub final_time: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Problem {
    pub flux: FluxName,
    pub speed: f64,
    pub numerical_flux: NumericalFluxKind,
    pub u_min: f64,
    pub u_max: f64,
    pub lambda: f64,
    pub length: f64,
    pub u0: InitialPreset,
    pub u0_mean: f64,
    /// Amplitude of `sin(k 2 pi x / L)` at index `k - 1`.
    pub u0_sin: Vec<f64>,
    pub u0_cos: Vec<f64>,
    pub source: SourceKind,
    pub decay: f64,
    #[serde(rename = "T")]
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discretization {
    pub k: usize,
    #[serde(rename = "N")]
    pub cells: usize,
    pub grids: Vec<usize>,
    pub cfl: f64,
    pub steps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Output {
    pub dir: PathBuf,
    pub snapshot_every: usize,
    pub points_per_cell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub assembly: f64,
    pub energy_identity: f64,
    pub inverse_growth: f64,
    pub flux_samples: usize,
    pub inverse_samples: usize,
    pub operator_symmetry: f64,
    pub operator_constants: f64,
    pub operator_paths: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub checks: Vec<CheckName>,
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub problem: Problem,
    pub discretization: Discretization,
    pub output: Output,
    pub run: Run,
    pub tolerances: Tolerances,
    pub diagnostics: Diagnostics,
    /// Keys that were filled from defaults, in section order.
    #[serde(skip)]
    pub defaulted: Vec<String>,
}

fn bad(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

struct Resolver {
    defaulted: Vec<String>,
}

impl Resolver {
    fn pick<T>(&mut self, key: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.defaulted.push(key.to_string());
            default
        })
    }
}

fn read_file(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| CliError::ConfigSyntax {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Reads `path` (if any), applies `flags` on top and validates.
pub fn parse_config(path: Option<&Path>, flags: &Overrides) -> Result<RunConfig> {
    let raw = match path {
        Some(p) => read_file(p)?,
        None => RawConfig::default(),
    };
    resolve(raw, flags)
}

/// Parses configuration text as if read from a file named `origin`.
pub fn parse_config_str(text: &str, origin: &str, flags: &Overrides) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::ConfigSyntax {
        path: PathBuf::from(origin),
        message: e.to_string(),
    })?;
    resolve(raw, flags)
}

fn resolve(mut raw: RawConfig, flags: &Overrides) -> Result<RunConfig> {
    let p = &mut raw.problem;
    let d = &mut raw.discretization;
    if flags.flux.is_some() {
        p.flux = flags.flux;
    }
    if flags.lambda.is_some() {
        p.lambda = flags.lambda;
    }
    if flags.final_time.is_some() {
        p.final_time = flags.final_time;
    }
    if flags.k.is_some() {
        d.k = flags.k;
    }
    if flags.cfl.is_some() {
        d.cfl = flags.cfl;
    }
    if let Some(g) = &flags.grids {
        d.grids = Some(g.clone());
        if let [n] = g.as_slice() {
            d.cells = Some(*n);
        }
    }
    if flags.out.is_some() {
        raw.output.dir = flags.out.clone();
    }
    if flags.seed.is_some() {
        raw.run.seed = flags.seed;
    }

    let mut r = Resolver { defaulted: Vec::new() };
    let p = raw.problem;
    let preset = r.pick("problem.u0", p.u0, InitialPreset::Battery);
    let (mean, sin, cos) = match preset {
        InitialPreset::Modes => {
            if p.u0_mean.is_none() && p.u0_sin.is_none() && p.u0_cos.is_none() {
                return Err(bad("problem.u0", "u0 = \"modes\" needs u0_mean, u0_sin or u0_cos"));
            }
            (
                r.pick("problem.u0_mean", p.u0_mean, 0.0),
                r.pick("problem.u0_sin", p.u0_sin, Vec::new()),
                r.pick("problem.u0_cos", p.u0_cos, Vec::new()),
            )
        }
        named => {
            for (key, set) in [
                ("problem.u0_mean", p.u0_mean.is_some()),
                ("problem.u0_sin", p.u0_sin.is_some()),
                ("problem.u0_cos", p.u0_cos.is_some()),
            ] {
                if set {
                    return Err(bad(key, "only allowed with u0 = \"modes\""));
                }
            }
            match named {
                InitialPreset::Battery => (0.0, vec![1.0], vec![0.0, 0.5]),
                InitialPreset::Sine => (0.0, vec![1.0], vec![]),
                _ => (0.5, vec![0.25], vec![]),
            }
        }
    };
    let problem = Problem {
        flux: r.pick("problem.flux", p.flux, FluxName::Linear),
        speed: r.pick("problem.speed", p.speed, 1.0),
        numerical_flux: r.pick("problem.numerical_flux", p.numerical_flux, NumericalFluxKind::Godunov),
        u_min: r.pick("problem.u_min", p.u_min, -3.0),
        u_max: r.pick("problem.u_max", p.u_max, 3.0),
        lambda: r.pick("problem.lambda", p.lambda, 0.5),
        length: r.pick("problem.length", p.length, 2.0 * std::f64::consts::PI),
        u0: preset,
        u0_mean: mean,
        u0_sin: sin,
        u0_cos: cos,
        source: r.pick("problem.source", p.source, SourceKind::None),
        decay: r.pick("problem.decay", p.decay, 1.0),
        final_time: r.pick("problem.T", p.final_time, 0.5),
    };
    let d = raw.discretization;
    let discretization = Discretization {
        k: r.pick("discretization.k", d.k, 1),
        cells: r.pick("discretization.N", d.cells, 64),
        grids: r.pick("discretization.grids", d.grids, vec![16, 32, 64, 128]),
        cfl: r.pick("discretization.cfl", d.cfl, DEFAULT_CFL),
        steps: r.pick("discretization.steps", d.steps, vec![50, 100, 200, 400]),
    };
    let o = raw.output;
    let output = Output {
        dir: r.pick("output.dir", o.dir, PathBuf::from("fracdg-out")),
        snapshot_every: r.pick("output.snapshot_every", o.snapshot_every, 0),
        points_per_cell: r.pick("output.points_per_cell", o.points_per_cell, 4),
    };
    let run = Run {
        seed: r.pick("run.seed", raw.run.seed, 1),
    };
    let t = raw.tolerances;
    let tolerances = Tolerances {
        assembly: r.pick("tolerances.assembly", t.assembly, DEFAULT_ASSEMBLY_TOLERANCE),
        energy_identity: r.pick("tolerances.energy_identity", t.energy_identity, 1e-6),
        inverse_growth: r.pick("tolerances.inverse_growth", t.inverse_growth, 1.2),
        flux_samples: r.pick("tolerances.flux_samples", t.flux_samples, 10_000),
        inverse_samples: r.pick("tolerances.inverse_samples", t.inverse_samples, 100),
        operator_symmetry: r.pick("tolerances.operator_symmetry", t.operator_symmetry, 1e-12),
        operator_constants: r.pick("tolerances.operator_constants", t.operator_constants, 1e-10),
        operator_paths: r.pick("tolerances.operator_paths", t.operator_paths, 1e-12),
    };
    let diagnostics = Diagnostics {
        checks: r.pick("diagnostics.checks", raw.diagnostics.checks, ALL_CHECKS.to_vec()),
    };
    let cfg = RunConfig {
        problem,
        discretization,
        output,
        run,
        tolerances,
        diagnostics,
        defaulted: r.defaulted,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn increasing(key: &str, v: &[usize], min: usize) -> Result<()> {
    if v.is_empty() {
        return Err(bad(key, "must not be empty"));
    }
    if v[0] < min {
        return Err(bad(key, format!("entries must be at least {min}, got {}", v[0])));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, format!("must be strictly increasing, got {v:?}")));
    }
    Ok(())
}

fn validate(c: &RunConfig) -> Result<()> {
    let p = &c.problem;
    if !(p.lambda > 0.0 && p.lambda < 1.0) {
        return Err(bad(
            "problem.lambda",
            format!("must lie in the supported range (0,1), got {}", p.lambda),
        ));
    }
    if !p.speed.is_finite() {
        return Err(bad("problem.speed", "must be finite"));
    }
    if !(p.u_min.is_finite() && p.u_max.is_finite() && p.u_min < p.u_max) {
        return Err(bad(
            "problem.u_max",
            format!("working interval [{}, {}] is empty", p.u_min, p.u_max),
        ));
    }
    positive("problem.length", p.length)?;
    if !(p.final_time >= 0.0 && p.final_time.is_finite()) {
        return Err(bad("problem.T", format!("must be nonnegative, got {}", p.final_time)));
    }
    if !p.decay.is_finite() {
        return Err(bad("problem.decay", "must be finite"));
    }
    for (key, list) in [("problem.u0_sin", &p.u0_sin), ("problem.u0_cos", &p.u0_cos)] {
        if list.iter().any(|a| !a.is_finite()) {
            return Err(bad(key, "amplitudes must be finite"));
        }
    }
    if !p.u0_mean.is_finite() {
        return Err(bad("problem.u0_mean", "must be finite"));
    }
    let d = &c.discretization;
    if d.k < 1 || d.k > MAX_OPERATOR_DEGREE {
        return Err(bad(
            "discretization.k",
            format!("must lie in 1..={MAX_OPERATOR_DEGREE}, got {}", d.k),
        ));
    }
    if d.cells < 2 {
        return Err(bad("discretization.N", format!("must be at least 2, got {}", d.cells)));
    }
    increasing("discretization.grids", &d.grids, 2)?;
    increasing("discretization.steps", &d.steps, 1)?;
    positive("discretization.cfl", d.cfl)?;
    if c.output.points_per_cell < 2 {
        return Err(bad("output.points_per_cell", "must be at least 2"));
    }
    let t = &c.tolerances;
    positive("tolerances.assembly", t.assembly)?;
    positive("tolerances.energy_identity", t.energy_identity)?;
    positive("tolerances.inverse_growth", t.inverse_growth)?;
    positive("tolerances.operator_symmetry", t.operator_symmetry)?;
    positive("tolerances.operator_constants", t.operator_constants)?;
    positive("tolerances.operator_paths", t.operator_paths)?;
    if t.flux_samples == 0 {
        return Err(bad("tolerances.flux_samples", "must be positive"));
    }
    if t.inverse_samples == 0 {
        return Err(bad("tolerances.inverse_samples", "must be positive"));
    }
    let mut seen = c.diagnostics.checks.clone();
    seen.sort();
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err(bad("diagnostics.checks", "lists a check more than once"));
    }
    Ok(())
}
