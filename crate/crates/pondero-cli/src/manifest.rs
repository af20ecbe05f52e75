//! The run manifest and the atomic file writes backing it.
//!
//! Every run ends (on success) with a `manifest.json` listing the emitted
//! files together with their SHA-256 checksums, so that byte-for-byte
//! reproducibility of a configuration + seed pair can be asserted by
//! comparing manifests. Files are written to a temporary name in the
//! target directory and renamed into place, which keeps readers from ever
//! observing a half-written file.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FORMAT: &str = "pondero-manifest v1";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// File name, relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub scenario: String,
    /// SHA-256 of the configuration file bytes as given.
    pub config_sha256: String,
    pub seed: u64,
    /// Worker threads the run was allowed to use; results do not depend
    /// on it.
    pub threads: usize,
    /// Wall-clock seconds from configuration parse to the last output
    /// file (the manifest write itself is excluded).
    pub wall_clock_s: f64,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Writes `bytes` to `path` atomically: the content lands under a
/// temporary name in the same directory and is renamed over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = tmp_name(path);
    fs::write(&tmp, bytes)?;
    match fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&tmp);
            Err(e)
        }
    }
}

fn tmp_name(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}", std::process::id()));
    path.with_file_name(name)
}
