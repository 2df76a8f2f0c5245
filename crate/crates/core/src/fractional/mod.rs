//! The fractional Laplacian `g_lambda` on the periodic DG space.
//!
//! The bilinear form is the periodized Gagliardo form
//!
//! ```text
//! D(phi, psi) = -(c_lambda / 2) int_T int_R (phi(x+z) - phi(x)) (psi(x+z) - psi(x)) |z|^{-1-lambda} dz dx
//! ```
//!
//! Because the mesh is uniform and periodic, the global matrix is block
//! circulant: the `(k+1) x (k+1)` block coupling test cell `j` to trial cell
//! `i` depends only on `d = (j - i) mod N`. Every block scales as
//! `c_lambda h^{-lambda}` times a reference block that depends on `(N, k, lambda)`.
//!
//! The same-cell block is assembled as
//! `-(1/2) Self + A^per_0 - W`, where `W` is the mass of the kernel outside
//! the cell, computed from the same periodized off-cell sums that fill the
//! other blocks. Constants are therefore annihilated to round-off whatever
//! the accuracy of the tail sums; the closed form of `W` is used as an
//! independent consistency check of those sums.

mod cache;
mod constant;
mod kernel;
mod spectral;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use cache::{cache_file_name, load_or_assemble, read_operator, write_operator, CACHE_VERSION};
pub use constant::{
    c_lambda_closed_form, c_lambda_from_mode, derive_c_lambda, one_sided_integral, IntegralResolution,
};
pub use spectral::SpectralOracle;

use crate::error::{invalid, Error, Result};
use crate::mesh::{dot, DGFunction, Mesh};
use crate::quadrature::GaussLegendre;
use kernel::{Square, FAR_OFFSET};

/// Default assembly tolerance.
pub const DEFAULT_ASSEMBLY_TOLERANCE: f64 = 1e-10;

/// Largest polynomial degree the assembly supports.
pub const MAX_OPERATOR_DEGREE: usize = 5;

/// Longest far-field series tried before giving up.
const MAX_FAR_TERMS: usize = 48;

/// Below this many cells `apply` uses the dense path.
const FAST_PATH_MIN_CELLS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyDiagnostics {
    /// Terms kept in the far-field series.
    pub far_terms: usize,
    /// Analytic bound of the dropped series terms, reference units.
    pub series_tail_bound: f64,
    /// Relative mismatch between the summed off-cell mass and its closed form.
    pub outside_mass_error: f64,
}

/// Assembled `g_lambda` bilinear form on `V_h`.
#[derive(Clone)]
pub struct FractionalOperator {
    lambda: f64,
    mesh: Arc<Mesh>,
    c_lambda: f64,
    eps_asm: f64,
    /// `blocks[(d * n + m) * n + c]`, `n = k + 1`.
    blocks: Vec<f64>,
    diagnostics: AssemblyDiagnostics,
    fast: FastPath,
}

impl fmt::Debug for FractionalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FractionalOperator")
            .field("lambda", &self.lambda)
            .field("cells", &self.mesh.cells())
            .field("degree", &self.mesh.degree())
            .field("c_lambda", &self.c_lambda)
            .field("eps_asm", &self.eps_asm)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

#[derive(Clone)]
struct FastPath {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// DFT over `d` of each block entry, `spectra[m * n + c]`.
    spectra: Vec<Vec<Complex64>>,
}

impl FastPath {
    fn new(cells: usize, n: usize, blocks: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(cells);
        let inverse = planner.plan_fft_inverse(cells);
        let spectra = (0..n * n)
            .map(|mc| {
                let mut buf: Vec<Complex64> = (0..cells)
                    .map(|d| Complex64::new(blocks[d * n * n + mc], 0.0))
                    .collect();
                forward.process(&mut buf);
                buf
            })
            .collect();
        Self {
            forward,
            inverse,
            spectra,
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "fractional order lambda must lie in (0, 1), got {lambda}"
        )))
    }
}

/// Reference blocks `R_e = sum_{s = e mod N, s != 0} A_s` for `e = 0..=N/2`,
/// with basis degrees up to `ext`.
struct PeriodicSums {
    sums: Vec<Square>,
    far_terms: usize,
    tail_bound: f64,
}

fn periodic_sums(cells: usize, ext: usize, lambda: f64, eps_asm: f64) -> Result<PeriodicSums> {
    let adjacent = kernel::adjacent_block(ext, lambda);
    let adjacent_t = adjacent.transpose();
    let rule = GaussLegendre::new(24);
    let near: Vec<Square> = (2..FAR_OFFSET)
        .map(|s| kernel::separated_block(s, ext, lambda, &rule))
        .collect();
    let near_block = |s: i64| -> Square {
        match s {
            1 => adjacent.clone(),
            -1 => adjacent_t.clone(),
            s if s >= 2 => near[(s - 2) as usize].clone(),
            s => near[(-s - 2) as usize].transpose(),
        }
    };

    let a0 = 1.0 + lambda;
    let terms = kernel::far_field_terms(ext, lambda, MAX_FAR_TERMS);
    // bound on sum_{|s| >= S0} |s|^{-a0-j}
    let s0 = FAR_OFFSET as f64;
    let image_bound = |j: usize| {
        let a = a0 + j as f64;
        2.0 * (s0.powf(-a) + s0.powf(1.0 - a) / (a - 1.0))
    };
    let term_bound: Vec<f64> = terms
        .iter()
        .enumerate()
        .map(|(j, t)| t.max_abs() * image_bound(j))
        .collect();
    let target = 1e-3 * eps_asm;
    let mut far_terms = None;
    for j in (ext + 1)..MAX_FAR_TERMS {
        let rest: f64 = term_bound[j..].iter().sum();
        if rest < target {
            far_terms = Some(j);
            break;
        }
    }
    let far_terms = far_terms.ok_or_else(|| {
        Error::AssemblyFailure(format!(
            "far-field series did not reach tolerance {target:.1e} within {MAX_FAR_TERMS} terms \
             (remaining bound {:.2e})",
            term_bound[MAX_FAR_TERMS - 1]
        ))
    })?;
    let tail_bound: f64 = term_bound[far_terms..].iter().sum();

    let n = cells as i64;
    let nf = cells as f64;
    let reach = FAR_OFFSET / n + 2;
    let mut sums = Vec::with_capacity(cells / 2 + 1);
    for e in 0..=(cells / 2) {
        let ei = e as i64;
        let mut acc = Square::zeros(ext + 1);
        for m in -reach..=reach {
            let s = ei + m * n;
            if s != 0 && s.abs() < FAR_OFFSET {
                acc.add_scaled(1.0, &near_block(s));
            }
        }
        let m_plus = ((FAR_OFFSET - ei) as f64 / nf).ceil().max(0.0);
        let q_plus = m_plus + e as f64 / nf;
        let m_minus = ((FAR_OFFSET + ei) as f64 / nf).ceil();
        let q_minus = m_minus - e as f64 / nf;
        for (j, t) in terms.iter().enumerate().take(far_terms) {
            let a = a0 + j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let z = nf.powf(-a)
                * (kernel::hurwitz_zeta(a, q_plus) + sign * kernel::hurwitz_zeta(a, q_minus));
            acc.add_scaled(z, t);
        }
        sums.push(acc);
    }
    Ok(PeriodicSums {
        sums,
        far_terms,
        tail_bound,
    })
}

impl FractionalOperator {
    /// Assembles the operator on `mesh` for order `lambda` with tolerance `eps_asm`.
    pub fn assemble(mesh: &Arc<Mesh>, lambda: f64, eps_asm: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(eps_asm > 0.0) {
            return Err(invalid("assembly tolerance must be positive"));
        }
        let k = mesh.degree();
        if k > MAX_OPERATOR_DEGREE {
            return Err(Error::Unsupported(format!(
                "fractional operator assembly supports degree <= {MAX_OPERATOR_DEGREE}, got {k}"
            )));
        }
        let c_lambda = derive_c_lambda(lambda)?;
        let cells = mesh.cells();
        let ext = 2 * k;
        let n = k + 1;

        let PeriodicSums {
            sums,
            far_terms,
            tail_bound,
        } = periodic_sums(cells, ext, lambda, eps_asm)?;

        let mut full: Vec<Square> = Vec::with_capacity(cells);
        for e in 0..cells {
            let blk = if e <= cells / 2 {
                let mut b = sums[e].clone();
                if e == 0 || 2 * e == cells {
                    b.symmetrize();
                }
                b
            } else {
                sums[cells - e].transpose()
            };
            full.push(blk);
        }

        // off-cell kernel mass against products of basis functions
        let ext_n = ext + 1;
        let mut column = vec![0.0; ext_n];
        for blk in &full {
            for (l, c) in column.iter_mut().enumerate() {
                *c += blk.get(l, 0);
            }
        }
        let triple = kernel::triple_products(k);
        let mut outside = Square::zeros(n);
        for m in 0..n {
            for c in 0..n {
                let v: f64 = (0..ext_n)
                    .map(|l| triple[(m * n + c) * ext_n + l] * column[l])
                    .sum();
                outside.set(m, c, v);
            }
        }
        outside.symmetrize();
        let exact = kernel::outside_mass_exact(k, lambda);
        let mut mismatch: f64 = 0.0;
        for (a, b) in outside.data.iter().zip(&exact.data) {
            mismatch = mismatch.max((a - b).abs());
        }
        let outside_mass_error = mismatch / exact.max_abs();
        if outside_mass_error > eps_asm {
            return Err(Error::AssemblyFailure(format!(
                "off-cell kernel mass mismatch {outside_mass_error:.2e} exceeds tolerance {eps_asm:.1e} \
                 (far terms {far_terms}, series tail bound {tail_bound:.2e})"
            )));
        }

        let scale = c_lambda * mesh.h().powf(-lambda);
        let self_blk = kernel::self_block(k, lambda);
        let mut blocks = vec![0.0; cells * n * n];
        for d in 0..cells {
            let e = (cells - d) % cells;
            let mut b = full[e].leading(n);
            if e == 0 {
                b.add_scaled(-0.5, &self_blk);
                b.add_scaled(-1.0, &outside);
                b.symmetrize();
            }
            for (dst, src) in blocks[d * n * n..(d + 1) * n * n].iter_mut().zip(&b.data) {
                *dst = scale * src;
            }
        }

        let diagnostics = AssemblyDiagnostics {
            far_terms,
            series_tail_bound: tail_bound,
            outside_mass_error,
        };
        Ok(Self::from_parts(mesh, lambda, c_lambda, eps_asm, blocks, diagnostics))
    }

    pub(crate) fn from_parts(
        mesh: &Arc<Mesh>,
        lambda: f64,
        c_lambda: f64,
        eps_asm: f64,
        blocks: Vec<f64>,
        diagnostics: AssemblyDiagnostics,
    ) -> Self {
        let n = mesh.dofs_per_cell();
        let fast = FastPath::new(mesh.cells(), n, &blocks);
        Self {
            lambda,
            mesh: Arc::clone(mesh),
            c_lambda,
            eps_asm,
            blocks,
            diagnostics,
            fast,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn c_lambda(&self) -> f64 {
        self.c_lambda
    }

    pub fn assembly_tolerance(&self) -> f64 {
        self.eps_asm
    }

    pub fn diagnostics(&self) -> &AssemblyDiagnostics {
        &self.diagnostics
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    /// Block `B_d`, row-major `(k+1) x (k+1)`.
    pub fn block(&self, d: usize) -> &[f64] {
        let nn = self.mesh.dofs_per_cell().pow(2);
        let d = d % self.mesh.cells();
        &self.blocks[d * nn..(d + 1) * nn]
    }

    /// Global matrix entry for test `(j, m)` and trial `(i, n)`.
    pub fn entry(&self, j: usize, m: usize, i: usize, n: usize) -> f64 {
        let cells = self.mesh.cells();
        let k1 = self.mesh.dofs_per_cell();
        let d = (j + cells - i % cells) % cells;
        self.block(d)[m * k1 + n]
    }

    /// Adds `delta` to one block entry. Intended for fault-injection tests.
    pub fn perturb_block(&mut self, d: usize, m: usize, n: usize, delta: f64) {
        let k1 = self.mesh.dofs_per_cell();
        let d = d % self.mesh.cells();
        self.blocks[(d * k1 + m) * k1 + n] += delta;
        self.fast = FastPath::new(self.mesh.cells(), k1, &self.blocks);
    }

    fn check(&self, phi: &DGFunction) -> Result<()> {
        if self.mesh.same_space(phi.mesh()) {
            Ok(())
        } else {
            Err(invalid("DG function does not match the operator's mesh/degree"))
        }
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() == self.mesh.dofs() {
            Ok(())
        } else {
            Err(invalid(format!(
                "expected {} coefficients, got {}",
                self.mesh.dofs(),
                coeffs.len()
            )))
        }
    }

    /// `v[(j, m)] = D(phi, basis_{j,m})`.
    pub fn apply(&self, phi: &DGFunction) -> Result<Vec<f64>> {
        self.check(phi)?;
        Ok(self.apply_coeffs(phi.coeffs()))
    }

    pub(crate) fn apply_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        if self.mesh.cells() >= FAST_PATH_MIN_CELLS {
            self.fast_product(coeffs)
        } else {
            self.dense_product(coeffs)
        }
    }

    /// Block-circulant product by direct summation, `O(N^2 (k+1)^2)`.
    pub fn apply_dense(&self, phi: &DGFunction) -> Result<Vec<f64>> {
        self.check(phi)?;
        Ok(self.dense_product(phi.coeffs()))
    }

    /// Block-circulant product via FFT, `O(N log N (k+1)^2)`.
    pub fn apply_fast(&self, phi: &DGFunction) -> Result<Vec<f64>> {
        self.check(phi)?;
        Ok(self.fast_product(phi.coeffs()))
    }

    fn dense_product(&self, u: &[f64]) -> Vec<f64> {
        let cells = self.mesh.cells();
        let n = self.mesh.dofs_per_cell();
        let mut out = vec![0.0; u.len()];
        for j in 0..cells {
            let row = &mut out[j * n..(j + 1) * n];
            for i in 0..cells {
                let d = (j + cells - i) % cells;
                let b = &self.blocks[d * n * n..(d + 1) * n * n];
                let ui = &u[i * n..(i + 1) * n];
                for m in 0..n {
                    row[m] += dot(&b[m * n..(m + 1) * n], ui);
                }
            }
        }
        out
    }

    fn fast_product(&self, u: &[f64]) -> Vec<f64> {
        let cells = self.mesh.cells();
        let n = self.mesh.dofs_per_cell();
        let inputs: Vec<Vec<Complex64>> = (0..n)
            .map(|c| {
                let mut buf: Vec<Complex64> =
                    (0..cells).map(|i| Complex64::new(u[i * n + c], 0.0)).collect();
                self.fast.forward.process(&mut buf);
                buf
            })
            .collect();
        let mut out = vec![0.0; u.len()];
        let inv_n = 1.0 / cells as f64;
        for m in 0..n {
            let mut acc = vec![Complex64::new(0.0, 0.0); cells];
            for (c, input) in inputs.iter().enumerate() {
                let spec = &self.fast.spectra[m * n + c];
                for ((a, s), x) in acc.iter_mut().zip(spec).zip(input) {
                    *a += s * x;
                }
            }
            self.fast.inverse.process(&mut acc);
            for (j, v) in acc.iter().enumerate() {
                out[j * n + m] = v.re * inv_n;
            }
        }
        out
    }

    /// `D(phi, psi) = psi^T B phi`.
    pub fn bilinear(&self, phi: &DGFunction, psi: &DGFunction) -> Result<f64> {
        self.check(psi)?;
        Ok(dot(psi.coeffs(), &self.apply(phi)?))
    }

    pub(crate) fn quadratic_coeffs(&self, coeffs: &[f64]) -> Result<f64> {
        self.check_len(coeffs)?;
        Ok(dot(coeffs, &self.apply_coeffs(coeffs)))
    }

    /// Gershgorin bound on the spectral radius of `B`.
    pub fn norm_bound(&self) -> f64 {
        let n = self.mesh.dofs_per_cell();
        (0..n)
            .map(|m| {
                (0..self.mesh.cells())
                    .map(|d| self.block(d)[m * n..(m + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn seminorm_sq_coeffs(&self, coeffs: &[f64]) -> Result<f64> {
        let q = -self.quadratic_coeffs(coeffs)?;
        let tol = 1e-11 * self.norm_bound() * dot(coeffs, coeffs);
        if q < -tol {
            return Err(Error::NumericalConsistency(format!(
                "negative H^(lambda/2) radicand {q:.3e} (tolerance {tol:.1e})"
            )));
        }
        Ok(q.max(0.0))
    }

    /// `|phi|_{H^{lambda/2}} = sqrt(-D(phi, phi))`, the Fourier-normalized
    /// seminorm `(sum_k |xi_k|^lambda |phi_k|^2 L)^{1/2}`.
    pub fn seminorm(&self, phi: &DGFunction) -> Result<f64> {
        self.check(phi)?;
        self.seminorm_sq_coeffs(phi.coeffs()).map(f64::sqrt)
    }

    /// Gagliardo seminorm `sqrt(-(2 / c_lambda) D(phi, phi))`.
    pub fn gagliardo_seminorm(&self, phi: &DGFunction) -> Result<f64> {
        Ok((2.0 / self.c_lambda).sqrt() * self.seminorm(phi)?)
    }

    /// Dense global matrix, row-major over `(j, m)` x `(i, n)`.
    pub fn to_dense(&self) -> Vec<f64> {
        let dofs = self.mesh.dofs();
        let n = self.mesh.dofs_per_cell();
        let mut a = vec![0.0; dofs * dofs];
        for r in 0..dofs {
            for c in 0..dofs {
                a[r * dofs + c] = self.entry(r / n, r % n, c / n, c % n);
            }
        }
        a
    }
}

/// Sampled inverse-inequality ratios `|phi|^2 h^lambda / ||phi||^2` on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseInequalityReport {
    pub cells: usize,
    pub h: f64,
    pub samples: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
    pub min_ratio: f64,
}

/// Ratio for one function; 0 for functions with zero norm.
pub fn inverse_inequality_ratio(op: &FractionalOperator, phi: &DGFunction) -> Result<f64> {
    let norm_sq = phi.l2_norm().powi(2);
    if norm_sq == 0.0 {
        return Ok(0.0);
    }
    Ok(op.seminorm(phi)?.powi(2) * op.mesh().h().powf(op.lambda()) / norm_sq)
}

/// Samples random DG functions with i.i.d. uniform coefficients.
pub fn check_inverse_inequality(
    op: &FractionalOperator,
    samples: usize,
    seed: u64,
) -> Result<InverseInequalityReport> {
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let mesh = op.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    for _ in 0..samples {
        let coeffs: Vec<f64> = (0..mesh.dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let phi = DGFunction::from_coeffs(mesh, coeffs)?;
        ratios.push(inverse_inequality_ratio(op, &phi)?);
    }
    Ok(InverseInequalityReport {
        cells: mesh.cells(),
        h: mesh.h(),
        samples,
        max_ratio: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        mean_ratio: ratios.iter().sum::<f64>() / samples as f64,
        min_ratio: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

/// Inverse-inequality ratios across a refinement sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseInequalityStudy {
    pub lambda: f64,
    pub degree: usize,
    pub grids: Vec<InverseInequalityReport>,
    /// Largest ratio over the finer half of the grids divided by that over the coarser half.
    pub growth: f64,
    pub pass: bool,
}

/// Allowed growth of the maximal ratio from coarse to fine grids.
pub const INVERSE_INEQUALITY_GROWTH: f64 = 1.2;

pub fn inverse_inequality_study(
    length: f64,
    grids: &[usize],
    degree: usize,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<InverseInequalityStudy> {
    if grids.len() < 2 {
        return Err(invalid("inverse-inequality study needs at least two grids"));
    }
    let mut reports = Vec::with_capacity(grids.len());
    for &cells in grids {
        let mesh = Mesh::shared(length, cells, degree)?;
        let op = FractionalOperator::assemble(&mesh, lambda, DEFAULT_ASSEMBLY_TOLERANCE)?;
        reports.push(check_inverse_inequality(&op, samples, seed)?);
    }
    let half = reports.len() / 2;
    let coarse = reports[..half].iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let fine = reports[half..].iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let growth = fine / coarse;
    Ok(InverseInequalityStudy {
        lambda,
        degree,
        grids: reports,
        growth,
        pass: growth.is_finite() && growth <= INVERSE_INEQUALITY_GROWTH,
    })
}
