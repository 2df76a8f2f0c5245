//! Uniform periodic mesh, orthonormal Legendre basis and piecewise polynomials.
//!
//! Cell `I_j = (j h, (j+1) h)` carries the basis
//! `phi_{j,m}(x) = sqrt((2m+1)/h) P_m(2 (x - x_j)/h - 1)`, which is orthonormal
//! in `L^2(I_j)`. The mass matrix is therefore the identity and every
//! coefficient vector is already in "dual" form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{legendre_derivatives, legendre_values, GaussLegendre};

/// Points per cell used for projections of callables.
const PROJECTION_EXTRA_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    length: f64,
    cells: usize,
    h: f64,
    degree: usize,
    volume_rule: GaussLegendre,
    projection_rule: GaussLegendre,
}

/// Side of a node at which a trace is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `x_j^-`, the right end of cell `j - 1`.
    Minus,
    /// `x_j^+`, the left end of cell `j`.
    Plus,
}

impl Mesh {
    /// Mesh of `cells` cells on the torus of length `length` for degree `degree`.
    pub fn new(length: f64, cells: usize, degree: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid(format!("domain length must be positive, got {length}")));
        }
        if cells < 2 {
            return Err(invalid(format!("need at least 2 cells, got {cells}")));
        }
        if degree < 1 {
            return Err(invalid("polynomial degree must be at least 1"));
        }
        Ok(Self {
            length,
            cells,
            h: length / cells as f64,
            degree,
            volume_rule: GaussLegendre::new(degree + 2),
            projection_rule: GaussLegendre::new(degree + PROJECTION_EXTRA_POINTS),
        })
    }

    pub fn shared(length: f64, cells: usize, degree: usize) -> Result<Arc<Self>> {
        Self::new(length, cells, degree).map(Arc::new)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions per cell.
    pub fn dofs_per_cell(&self) -> usize {
        self.degree + 1
    }

    pub fn dofs(&self) -> usize {
        self.cells * (self.degree + 1)
    }

    /// Rule with `k + 2` points, exact to degree `2k + 3`.
    pub fn volume_rule(&self) -> &GaussLegendre {
        &self.volume_rule
    }

    pub fn projection_rule(&self) -> &GaussLegendre {
        &self.projection_rule
    }

    /// Left node `x_j` of cell `j` (index wraps).
    pub fn node(&self, j: isize) -> f64 {
        j.rem_euclid(self.cells as isize) as f64 * self.h
    }

    pub fn wrap_index(&self, j: isize) -> usize {
        j.rem_euclid(self.cells as isize) as usize
    }

    /// Physical coordinate of reference point `r in [-1, 1]` in cell `j`.
    pub fn to_physical(&self, j: usize, r: f64) -> f64 {
        (j as f64 + 0.5 * (r + 1.0)) * self.h
    }

    /// Cell containing `x` and the reference coordinate inside it.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        if !x.is_finite() {
            return Err(invalid(format!("evaluation point {x} is not finite")));
        }
        let xw = x.rem_euclid(self.length);
        if !(0.0..self.length).contains(&xw) {
            return Err(invalid(format!("point {x} outside [0, {})", self.length)));
        }
        let j = ((xw / self.h).floor() as usize).min(self.cells - 1);
        let r = 2.0 * (xw - j as f64 * self.h) / self.h - 1.0;
        Ok((j, r.clamp(-1.0, 1.0)))
    }

    /// Orthonormal basis values at reference coordinate `r`.
    pub fn basis(&self, r: f64) -> Vec<f64> {
        let scale = 1.0 / self.h;
        legendre_values(self.degree, r)
            .into_iter()
            .enumerate()
            .map(|(m, p)| ((2 * m + 1) as f64 * scale).sqrt() * p)
            .collect()
    }

    /// Physical x-derivatives of the basis at reference coordinate `r`.
    pub fn basis_dx(&self, r: f64) -> Vec<f64> {
        let scale = 1.0 / self.h;
        legendre_derivatives(self.degree, r)
            .into_iter()
            .enumerate()
            .map(|(m, d)| ((2 * m + 1) as f64 * scale).sqrt() * d * 2.0 * scale)
            .collect()
    }

    pub fn same_space(&self, other: &Mesh) -> bool {
        self.cells == other.cells && self.degree == other.degree && self.length == other.length
    }
}

/// Piecewise polynomial of degree `k` stored by orthonormal coefficients,
/// laid out cell-major: `coeffs[j * (k + 1) + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DGFunction {
    mesh: Arc<Mesh>,
    coeffs: Vec<f64>,
}

impl DGFunction {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            coeffs: vec![0.0; mesh.dofs()],
        }
    }

    pub fn from_coeffs(mesh: &Arc<Mesh>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.dofs() {
            return Err(invalid(format!(
                "expected {} coefficients, got {}",
                mesh.dofs(),
                coeffs.len()
            )));
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            coeffs,
        })
    }

    /// Globally constant function.
    pub fn constant(mesh: &Arc<Mesh>, value: f64) -> Self {
        let mut f = Self::zeros(mesh);
        let c0 = value * mesh.h().sqrt();
        for j in 0..mesh.cells() {
            f.coeffs[j * mesh.dofs_per_cell()] = c0;
        }
        f
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.mesh.degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn cell(&self, j: usize) -> &[f64] {
        let n = self.mesh.dofs_per_cell();
        &self.coeffs[j * n..(j + 1) * n]
    }

    pub fn cell_mut(&mut self, j: usize) -> &mut [f64] {
        let n = self.mesh.dofs_per_cell();
        &mut self.coeffs[j * n..(j + 1) * n]
    }

    /// Value of the cell polynomial of cell `j` at reference coordinate `r`.
    pub fn eval_local(&self, j: usize, r: f64) -> f64 {
        self.mesh
            .basis(r)
            .iter()
            .zip(self.cell(j))
            .map(|(b, c)| b * c)
            .sum()
    }

    /// Point value; `x` is wrapped into `[0, L)`. At a node the right cell is used.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let (j, r) = self.mesh.locate(x)?;
        Ok(self.eval_local(j, r))
    }

    /// One-sided trace at node `x_j`.
    pub fn trace(&self, j: isize, side: Side) -> f64 {
        match side {
            Side::Minus => self.eval_local(self.mesh.wrap_index(j - 1), 1.0),
            Side::Plus => self.eval_local(self.mesh.wrap_index(j), -1.0),
        }
    }

    /// `[[phi]]_j = phi(x_j^+) - phi(x_j^-)`.
    pub fn jump(&self, j: isize) -> f64 {
        self.trace(j, Side::Plus) - self.trace(j, Side::Minus)
    }

    pub fn cell_mean(&self, j: usize) -> f64 {
        self.cell(j)[0] / self.mesh.h().sqrt()
    }

    /// `sum_j h * mean_j`, the integral over the torus.
    pub fn mass(&self) -> f64 {
        let n = self.mesh.dofs_per_cell();
        self.mesh.h().sqrt() * self.coeffs.iter().step_by(n).sum::<f64>()
    }

    fn check_compatible(&self, other: &DGFunction) -> Result<()> {
        if Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh.same_space(&other.mesh) {
            Ok(())
        } else {
            Err(invalid("DG functions live on different meshes or degrees"))
        }
    }

    /// Exact `L^2` pairing.
    pub fn inner_product(&self, other: &DGFunction) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(dot(&self.coeffs, &other.coeffs))
    }

    pub fn l2_norm(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs).sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DGFunction) -> Result<()> {
        self.check_compatible(other)?;
        axpy(alpha, &other.coeffs, &mut self.coeffs);
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= alpha);
    }

    pub fn linear_combination(a: f64, x: &DGFunction, b: f64, y: &DGFunction) -> Result<DGFunction> {
        x.check_compatible(y)?;
        let coeffs = x
            .coeffs
            .iter()
            .zip(&y.coeffs)
            .map(|(u, v)| a * u + b * v)
            .collect();
        Ok(DGFunction {
            mesh: Arc::clone(&x.mesh),
            coeffs,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// `points` equispaced samples per cell (cell-interior), for plotting.
    pub fn sample(&self, points: usize) -> Vec<(f64, f64)> {
        let points = points.max(1);
        let mut out = Vec::with_capacity(points * self.mesh.cells());
        for j in 0..self.mesh.cells() {
            for i in 0..points {
                let r = -1.0 + (2.0 * i as f64 + 1.0) / points as f64;
                out.push((self.mesh.to_physical(j, r), self.eval_local(j, r)));
            }
        }
        out
    }
}

/// `L^2` projection of a callable onto `V_h` using the projection rule.
pub fn l2_project<F: Fn(f64) -> f64>(v: F, mesh: &Arc<Mesh>) -> DGFunction {
    project_with_rule(&v, mesh, mesh.projection_rule())
}

pub(crate) fn project_with_rule<F: Fn(f64) -> f64 + ?Sized>(
    v: &F,
    mesh: &Arc<Mesh>,
    rule: &GaussLegendre,
) -> DGFunction {
    let mut out = DGFunction::zeros(mesh);
    let basis: Vec<Vec<f64>> = rule.nodes.iter().map(|&r| mesh.basis(r)).collect();
    let half_h = 0.5 * mesh.h();
    for j in 0..mesh.cells() {
        let cell = out.cell_mut(j);
        for (q, &r) in rule.nodes.iter().enumerate() {
            let w = rule.weights[q] * half_h * v(mesh.to_physical(j, r));
            for (c, b) in cell.iter_mut().zip(&basis[q]) {
                *c += w * b;
            }
        }
    }
    out
}

/// `L^2` distance between a callable and a DG function by cell quadrature
/// with `points` points per cell.
pub fn l2_distance<F: Fn(f64) -> f64>(v: F, phi: &DGFunction, points: usize) -> f64 {
    let mesh = phi.mesh();
    let rule = GaussLegendre::new(points);
    let half_h = 0.5 * mesh.h();
    let mut acc = 0.0;
    for j in 0..mesh.cells() {
        for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
            let e = v(mesh.to_physical(j, r)) - phi.eval_local(j, r);
            acc += w * half_h * e * e;
        }
    }
    acc.sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}
