//! Binary on-disk cache of assembled operator blocks.
//!
//! Layout, little-endian: magic `FRACDGOP`, `u32` version, `u64` cells,
//! `u64` degree, `f64` length, lambda, c_lambda, eps_asm, `u64` far terms,
//! `f64` tail bound, outside-mass error, then the `N (k+1)^2` block entries.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{AssemblyDiagnostics, FractionalOperator};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

const MAGIC: &[u8; 8] = b"FRACDGOP";
pub const CACHE_VERSION: u32 = 1;

/// File name encoding the operator parameters.
pub fn cache_file_name(mesh: &Mesh, lambda: f64, eps_asm: f64) -> String {
    format!(
        "op_N{}_k{}_L{:016x}_lam{:016x}_eps{:016x}.bin",
        mesh.cells(),
        mesh.degree(),
        mesh.length().to_bits(),
        lambda.to_bits(),
        eps_asm.to_bits()
    )
}

fn resource(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Resource(format!("{}: {e}", path.display()))
}

pub fn write_operator(op: &FractionalOperator, path: &Path) -> Result<()> {
    let mesh = op.mesh();
    let mut buf = Vec::with_capacity(96 + 8 * op.blocks().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(mesh.cells() as u64).to_le_bytes());
    buf.extend_from_slice(&(mesh.degree() as u64).to_le_bytes());
    for v in [mesh.length(), op.lambda(), op.c_lambda(), op.assembly_tolerance()] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let d = op.diagnostics();
    buf.extend_from_slice(&(d.far_terms as u64).to_le_bytes());
    buf.extend_from_slice(&d.series_tail_bound.to_le_bytes());
    buf.extend_from_slice(&d.outside_mass_error.to_le_bytes());
    for v in op.blocks() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| resource(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &buf).map_err(|e| resource(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| resource(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const W: usize>(&mut self) -> Option<[u8; W]> {
        let out = self.bytes.get(self.pos..self.pos + W)?.try_into().ok()?;
        self.pos += W;
        Some(out)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Option<u64> {
        self.take().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Option<f64> {
        self.take().map(f64::from_le_bytes)
    }
}

/// Reads a cached operator; `None` if the file is absent, stale, or for other parameters.
pub fn read_operator(
    path: &Path,
    mesh: &Arc<Mesh>,
    lambda: f64,
    eps_asm: f64,
) -> Result<Option<FractionalOperator>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(resource(path, e)),
    };
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let parsed = (|| {
        if &r.take::<8>()? != MAGIC || r.u32()? != CACHE_VERSION {
            return None;
        }
        let cells = r.u64()? as usize;
        let degree = r.u64()? as usize;
        let length = r.f64()?;
        let lam = r.f64()?;
        let c_lambda = r.f64()?;
        let eps = r.f64()?;
        if cells != mesh.cells()
            || degree != mesh.degree()
            || length.to_bits() != mesh.length().to_bits()
            || lam.to_bits() != lambda.to_bits()
            || eps.to_bits() != eps_asm.to_bits()
        {
            return None;
        }
        let diagnostics = AssemblyDiagnostics {
            far_terms: r.u64()? as usize,
            series_tail_bound: r.f64()?,
            outside_mass_error: r.f64()?,
        };
        let count = cells * (degree + 1) * (degree + 1);
        let blocks: Option<Vec<f64>> = (0..count).map(|_| r.f64()).collect();
        let blocks = blocks?;
        if r.pos != bytes.len() || !blocks.iter().all(|v| v.is_finite()) {
            return None;
        }
        Some((c_lambda, diagnostics, blocks))
    })();
    Ok(parsed.map(|(c_lambda, diagnostics, blocks)| {
        FractionalOperator::from_parts(mesh, lambda, c_lambda, eps_asm, blocks, diagnostics)
    }))
}

/// Loads the operator from `dir` if cached, otherwise assembles and stores it.
pub fn load_or_assemble(
    dir: Option<&Path>,
    mesh: &Arc<Mesh>,
    lambda: f64,
    eps_asm: f64,
) -> Result<FractionalOperator> {
    let Some(dir) = dir else {
        return FractionalOperator::assemble(mesh, lambda, eps_asm);
    };
    let path: PathBuf = dir.join(cache_file_name(mesh, lambda, eps_asm));
    if let Some(op) = read_operator(&path, mesh, lambda, eps_asm)? {
        return Ok(op);
    }
    let op = FractionalOperator::assemble(mesh, lambda, eps_asm)?;
    write_operator(&op, &path)?;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_mismatch() {
        let dir = std::env::temp_dir().join(format!("fracdg-cache-test-{}", std::process::id()));
        let mesh = Mesh::shared(1.0, 6, 1).unwrap();
        let op = load_or_assemble(Some(&dir), &mesh, 0.5, 1e-10).unwrap();
        let path = dir.join(cache_file_name(&mesh, 0.5, 1e-10));
        let back = read_operator(&path, &mesh, 0.5, 1e-10).unwrap().unwrap();
        assert_eq!(back.blocks(), op.blocks());
        assert!(read_operator(&path, &mesh, 0.4, 1e-10).unwrap().is_none());
        fs::write(&path, b"garbage").unwrap();
        assert!(read_operator(&path, &mesh, 0.5, 1e-10).unwrap().is_none());
        fs::remove_dir_all(&dir).ok();
    }
}
