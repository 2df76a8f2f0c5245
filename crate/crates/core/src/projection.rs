//! Left/right Gauss-Radau projections, the upwind projection choice with
//! threshold and reuse, and switch counting.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mesh::{DGFunction, Mesh};

/// Which cell endpoint the Gauss-Radau projection interpolates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadauSide {
    /// Matches at `x_j^+`.
    Left,
    /// Matches at `x_{j+1}^-`.
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionChoice {
    pub sides: Vec<RadauSide>,
}

impl ProjectionChoice {
    pub fn uniform(cells: usize, side: RadauSide) -> Self {
        Self {
            sides: vec![side; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.sides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sides.is_empty()
    }
}

/// Gauss-Radau coefficients on cell `j`: `L^2` coefficients below degree `k`,
/// the top one fixed by the endpoint value.
fn radau_cell(v: &dyn Fn(f64) -> f64, mesh: &Mesh, j: usize, side: RadauSide, out: &mut [f64]) {
    let k = mesh.degree();
    let rule = mesh.projection_rule();
    let half_h = 0.5 * mesh.h();
    out.iter_mut().for_each(|c| *c = 0.0);
    for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fv = w * half_h * v(mesh.to_physical(j, r));
        for (c, b) in out[..k].iter_mut().zip(mesh.basis(r)) {
            *c += fv * b;
        }
    }
    let (r_end, x_end) = match side {
        RadauSide::Left => (-1.0, mesh.node(j as isize)),
        RadauSide::Right => (1.0, mesh.node(j as isize + 1)),
    };
    // evaluate at the endpoint inside the cell, not at the wrapped node
    let x_end = if side == RadauSide::Right && j + 1 == mesh.cells() {
        mesh.length()
    } else {
        x_end
    };
    let trace = mesh.basis(r_end);
    let partial: f64 = out[..k].iter().zip(&trace).map(|(c, b)| c * b).sum();
    out[k] = (v(x_end) - partial) / trace[k];
}

pub fn gauss_radau_project(v: &dyn Fn(f64) -> f64, mesh: &Arc<Mesh>, side: RadauSide) -> DGFunction {
    let mut out = DGFunction::zeros(mesh);
    for j in 0..mesh.cells() {
        radau_cell(v, mesh, j, side, out.cell_mut(j));
    }
    out
}

/// Per-cell dispatch to the left or right Gauss-Radau projection.
pub fn upwind_project(
    v: &dyn Fn(f64) -> f64,
    choice: &ProjectionChoice,
    mesh: &Arc<Mesh>,
) -> Result<DGFunction> {
    if choice.len() != mesh.cells() {
        return Err(invalid(format!(
            "projection choice has {} cells, mesh has {}",
            choice.len(),
            mesh.cells()
        )));
    }
    let mut out = DGFunction::zeros(mesh);
    for (j, &side) in choice.sides.iter().enumerate() {
        radau_cell(v, mesh, j, side, out.cell_mut(j));
    }
    Ok(out)
}

/// Sample points of cell `j`: volume-rule nodes plus both endpoints.
fn cell_samples(mesh: &Mesh, j: usize) -> impl Iterator<Item = f64> + '_ {
    let rule = mesh.volume_rule();
    let lo = mesh.to_physical(j, -1.0);
    let hi = mesh.to_physical(j, 1.0);
    rule.nodes
        .iter()
        .map(move |&r| mesh.to_physical(j, r))
        .chain([lo, hi])
}

/// Upwind projection choice at time level `level` from samples `fprime(j, x)`
/// of `f'(u^n)` on the closed cell `j`.
///
/// Level 0: right where `f' > 0` on the whole cell, left otherwise.
/// Later levels: right where `f' > threshold`, left where `f' < -threshold`,
/// otherwise the previous choice is reused.
pub fn upwind_projection_choice(
    fprime: &dyn Fn(usize, f64) -> f64,
    mesh: &Mesh,
    threshold: f64,
    previous: Option<&ProjectionChoice>,
    level: usize,
) -> Result<ProjectionChoice> {
    if !(threshold >= 0.0) {
        return Err(invalid("projection threshold must be nonnegative"));
    }
    let previous = match (level, previous) {
        (0, _) => None,
        (_, Some(p)) if p.len() == mesh.cells() => Some(p),
        (_, Some(p)) => {
            return Err(invalid(format!(
                "previous choice has {} cells, mesh has {}",
                p.len(),
                mesh.cells()
            )))
        }
        (_, None) => {
            return Err(invalid(format!(
                "level {level} needs the previous projection choice"
            )))
        }
    };
    let sides = (0..mesh.cells())
        .map(|j| {
            let samples: Vec<f64> = cell_samples(mesh, j).map(|x| fprime(j, x)).collect();
            match previous {
                None => {
                    if samples.iter().all(|&d| d > 0.0) {
                        RadauSide::Right
                    } else {
                        RadauSide::Left
                    }
                }
                Some(prev) => {
                    if samples.iter().all(|&d| d > threshold) {
                        RadauSide::Right
                    } else if samples.iter().all(|&d| d < -threshold) {
                        RadauSide::Left
                    } else {
                        prev.sides[j]
                    }
                }
            }
        })
        .collect();
    Ok(ProjectionChoice { sides })
}

/// Per-cell switch counts `#O_j` over a sequence of time levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchCounter {
    pub counts: Vec<usize>,
    /// Number of level transitions examined.
    pub transitions: usize,
}

impl SwitchCounter {
    pub fn max_count(&self) -> usize {
        self.counts.iter().copied().max().unwrap_or(0)
    }
}

pub fn count_switches(levels: &[ProjectionChoice]) -> Result<SwitchCounter> {
    let cells = levels.first().map_or(0, ProjectionChoice::len);
    if levels.iter().any(|c| c.len() != cells) {
        return Err(invalid("projection choices differ in cell count"));
    }
    let mut counts = vec![0; cells];
    for pair in levels.windows(2) {
        for (c, (a, b)) in counts.iter_mut().zip(pair[0].sides.iter().zip(&pair[1].sides)) {
            if a != b {
                *c += 1;
            }
        }
    }
    Ok(SwitchCounter {
        counts,
        transitions: levels.len().saturating_sub(1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchBoundReport {
    pub h: f64,
    pub final_time: f64,
    pub alpha: u32,
    pub c_t_alpha: f64,
    pub max_count: usize,
    /// `alpha T C^{1/alpha} h^{-1/alpha}`.
    pub bound: f64,
    pub pass: bool,
}

pub fn verify_switch_bound(
    counter: &SwitchCounter,
    final_time: f64,
    h: f64,
    alpha: u32,
    c_t_alpha: f64,
) -> Result<SwitchBoundReport> {
    if alpha < 2 || !(h > 0.0) || !(final_time >= 0.0) || !(c_t_alpha >= 0.0) {
        return Err(invalid(
            "switch bound needs alpha >= 2, h > 0, T >= 0 and C >= 0",
        ));
    }
    let a = alpha as f64;
    let bound = a * final_time * c_t_alpha.powf(1.0 / a) * h.powf(-1.0 / a);
    let max_count = counter.max_count();
    Ok(SwitchBoundReport {
        h,
        final_time,
        alpha,
        c_t_alpha,
        max_count,
        bound,
        pass: max_count as f64 <= bound,
    })
}

/// Switch counts for a spatially uniform `f'(u(t, x)) = A sin(omega t)` on
/// `N` cells of a unit torus with `tau = cfl h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSwitchStudy {
    pub amplitude: f64,
    pub omega: f64,
    pub final_time: f64,
    pub rows: Vec<SwitchBoundReport>,
    /// Least-squares slope of `log max #O_j` against `log h`.
    pub slope: f64,
}

pub fn synthetic_switch_study(
    amplitude: f64,
    omega: f64,
    final_time: f64,
    cells: &[usize],
    cfl: f64,
) -> Result<SyntheticSwitchStudy> {
    let c_t2 = amplitude * omega * omega;
    let mut rows = Vec::with_capacity(cells.len());
    for &n in cells {
        let mesh = Mesh::new(1.0, n, 1)?;
        let h = mesh.h();
        let steps = crate::scheme::time_steps(final_time, cfl * h);
        let mut t = 0.0;
        let fprime = |t: f64| move |_j: usize, _x: f64| amplitude * (omega * t).sin();
        let mut levels = vec![upwind_projection_choice(&fprime(0.0), &mesh, h, None, 0)?];
        for (i, tau) in steps.iter().enumerate() {
            t += tau;
            let next = upwind_projection_choice(&fprime(t), &mesh, h, levels.last(), i + 1)?;
            levels.push(next);
        }
        let counter = count_switches(&levels)?;
        rows.push(verify_switch_bound(&counter, final_time, h, 2, c_t2)?);
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.h.ln(), (r.max_count.max(1) as f64).ln()))
        .collect();
    Ok(SyntheticSwitchStudy {
        amplitude,
        omega,
        final_time,
        slope: least_squares_slope(&pts),
        rows,
    })
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return 0.0;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
