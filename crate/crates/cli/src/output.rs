//! Atomic output files and the per-directory run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub inputs: BTreeMap<String, InputDigest>,
    pub config: Value,
    /// sha256 of every file written, by file name.
    pub outputs: BTreeMap<String, String>,
}

/// Contents of `manifest.json`: the latest run of each command that wrote
/// into the directory. Paths are reduced to file names so that runs in
/// different directories on identical inputs produce identical manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: BTreeMap<String, RunManifest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn read_input(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = parent_dir(path);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let fail = |e: std::io::Error| CliError::input(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(fail)?;
    tmp.write_all(bytes).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Collects inputs and outputs of one command run.
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    pub fn new(dir: PathBuf, command: &str) -> Self {
        Run {
            dir,
            manifest: RunManifest {
                command: command.to_owned(),
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                seed: None,
                inputs: BTreeMap::new(),
                config: Value::Null,
                outputs: BTreeMap::new(),
            },
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn config(&mut self, config: Value) {
        self.manifest.config = config;
    }

    /// Hashes an input file under `role`.
    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        let bytes = read_input(path)?;
        self.manifest.inputs.insert(role.to_owned(), InputDigest { file: file_name(path), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        write_atomic(path, bytes)?;
        self.manifest.outputs.insert(file_name(path), sha256_hex(bytes));
        Ok(())
    }

    /// Records this run in the directory manifest, replacing an earlier run
    /// of the same command.
    pub fn finish(self) -> CliResult<()> {
        let path = self.dir.join(MANIFEST);
        let mut manifest = match std::fs::read(&path) {
            Ok(bytes) => serde_json::from_slice::<Manifest>(&bytes).unwrap_or_default(),
            Err(_) => Manifest::default(),
        };
        manifest.runs.insert(self.manifest.command.clone(), self.manifest);
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&path, &bytes)
    }
}
