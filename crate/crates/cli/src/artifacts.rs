//! Atomic artifact writes, input hashing and run manifests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Tracks what a run reads and writes under one output directory.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    inputs: BTreeMap<String, String>,
    outputs: Vec<(PathBuf, FileHash)>,
}

impl Artifacts {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Artifacts { root: root.to_path_buf(), inputs: BTreeMap::new(), outputs: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Name under which `path` is recorded: relative to the output
    /// directory when inside it.
    fn display_name(&self, path: &Path) -> String {
        path.strip_prefix(&self.root).unwrap_or(path).to_string_lossy().replace('\\', "/")
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        let hash = FileHash { path: self.display_name(&path), sha256: sha256_hex(bytes) };
        self.outputs.retain(|(p, _)| *p != path);
        self.outputs.push((path.clone(), hash));
        Ok(path)
    }

    /// Reads an input file and records its hash.
    pub fn read(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let name = self.display_name(path);
        if !self.outputs.iter().any(|(p, _)| p == path) {
            self.inputs.insert(name, sha256_hex(&bytes));
        }
        Ok(bytes)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &FileHash> {
        self.outputs.iter().map(|(_, h)| h)
    }

    pub fn hash_of(&self, path: &Path) -> Option<&str> {
        self.outputs
            .iter()
            .find(|(p, _)| p == path)
            .map(|(_, h)| h.sha256.as_str())
            .or_else(|| self.inputs.get(&self.display_name(path)).map(String::as_str))
    }

    /// Removes everything this run wrote.
    pub fn discard(&mut self) {
        for (path, _) in self.outputs.drain(..) {
            let _ = std::fs::remove_file(path);
        }
    }

    pub fn manifest(&self, command: &str, config_sha256: String, config: serde_json::Value, seeds: Seeds) -> Manifest {
        Manifest {
            tool: "quantlet".into(),
            command: command.into(),
            versions: Versions { cli: env!("CARGO_PKG_VERSION").into(), core: quantlet_core::VERSION.into() },
            parallel: cfg!(feature = "parallel"),
            config_sha256,
            seeds,
            config,
            inputs: self.inputs.iter().map(|(p, h)| FileHash { path: p.clone(), sha256: h.clone() }).collect(),
            outputs: self.outputs().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub cli: String,
    pub core: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Seeds {
    pub dictionary: u64,
    pub eval: u64,
    pub synth: Option<u64>,
}

/// Run record written to `manifests/<command>.json`. It carries no
/// timestamps, so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub command: String,
    pub versions: Versions,
    pub parallel: bool,
    pub config_sha256: String,
    pub seeds: Seeds,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}
