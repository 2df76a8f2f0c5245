//! Artifact writing: every file lands under the output directory and is
//! listed with its SHA-256 in `manifest.json`.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `files` (name, contents) into `dir` followed by the manifest.
pub fn write_artifacts(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut entries = Vec::with_capacity(files.len());
    for (name, data) in files {
        let path = dir.join(name);
        fs::write(&path, data).map_err(io(&path))?;
        entries.push(ManifestEntry {
            path: name.clone(),
            bytes: data.len(),
            sha256: format!("{:x}", Sha256::digest(data)),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest { files: entries };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    fs::write(&path, text).map_err(io(&path))?;
    Ok(manifest)
}
