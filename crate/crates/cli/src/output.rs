//! Output directory handling. `manifest.json` is written last, through a
//! temporary file and a rename, so its presence marks a complete run.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::experiments::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub toolkit_version: &'static str,
    pub config: serde_json::Value,
    pub files: Vec<FileEntry>,
    pub assertions_passed: bool,
    pub wall_time_seconds: f64,
}

fn io(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Removes a manifest left by an earlier run, so a failed rerun is not mistaken for a complete one.
pub fn discard_manifest(dir: &Path) -> Result<(), Failure> {
    match fs::remove_file(dir.join(MANIFEST)) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io(e)),
        _ => Ok(()),
    }
}

/// Writes every file into `dir` (creating it) and returns their checksums.
/// Any stale manifest is removed first.
pub fn write_files(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<FileEntry>, Failure> {
    fs::create_dir_all(dir).map_err(io)?;
    discard_manifest(dir)?;
    files
        .iter()
        .map(|(name, data)| {
            fs::write(dir.join(name), data).map_err(io)?;
            Ok(FileEntry {
                path: name.clone(),
                bytes: data.len(),
                sha256: sha256_hex(data),
            })
        })
        .collect()
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), Failure> {
    let tmp = dir.join(format!("{MANIFEST}.tmp"));
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Failure::Io(e.to_string()))?;
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.write_all(b"\n").map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, dir.join(MANIFEST)).map_err(io)
}
