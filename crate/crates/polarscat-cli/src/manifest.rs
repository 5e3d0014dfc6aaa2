//! Run manifests and staged output writing.
//!
//! Every subcommand renders its outputs fully in memory and flushes them in
//! one step, so a failing run leaves no partial files behind. The manifest
//! written next to the outputs records the configuration digest, tool and
//! library versions, the effective seed, any overrides, and a digest of
//! every file produced. Nothing in it depends on the clock, so reruns with
//! the same inputs reproduce it byte for byte.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub tool_version: String,
    pub library_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub overrides: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    pub notes: Vec<String>,
}

/// Output files staged for one subcommand.
#[derive(Default)]
pub struct Staging {
    files: Vec<(String, Vec<u8>)>,
    notes: Vec<String>,
}

impl Staging {
    pub fn new() -> Self {
        Staging::default()
    }

    /// Stages a file at `rel_path` below the output directory.
    pub fn add(&mut self, rel_path: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((rel_path.into(), bytes.into()));
    }

    /// Records a provenance note for the manifest.
    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    /// Writes every staged file plus `manifest_<subcommand>.json` under
    /// `out_dir`, creating directories as needed. Returns the manifest path.
    pub fn commit(
        self,
        out_dir: &Path,
        subcommand: &str,
        config_sha256: &str,
        seed: u64,
        overrides: &[String],
    ) -> std::io::Result<PathBuf> {
        let mut outputs: Vec<OutputEntry> = self
            .files
            .iter()
            .map(|(path, bytes)| OutputEntry {
                path: path.clone(),
                sha256: sha256_hex(bytes),
            })
            .collect();
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            subcommand: subcommand.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            library_version: polarscat::VERSION.into(),
            config_sha256: config_sha256.into(),
            seed,
            overrides: overrides.to_vec(),
            outputs,
            notes: self.notes,
        };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');

        std::fs::create_dir_all(out_dir)?;
        for (rel, bytes) in &self.files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        let manifest_path = out_dir.join(format!("manifest_{subcommand}.json"));
        std::fs::write(&manifest_path, json)?;
        Ok(manifest_path)
    }
}
