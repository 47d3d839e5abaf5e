//! Run manifests: what produced a set of output files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hemo_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Manifest path for a command writing a single file.
pub fn manifest_for_file(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Debug, Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    schema: &'static str,
    command: String,
    args: Vec<String>,
    tool_version: &'static str,
    solver_revision: u32,
    started_unix: f64,
    finished_unix: f64,
    seeds: BTreeMap<String, u64>,
    configs: Vec<FileRecord>,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.to_path_buf()),
        _ => Error::Io(e),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?)
        .map_err(|_| Error::Parse(format!("{} is not UTF-8 text", path.display())))
}

impl Manifest {
    pub fn start(command: &str) -> Self {
        Self {
            schema: "hemo-manifest/1",
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION"),
            solver_revision: hemo_core::pipeline::SOLVER_REVISION,
            started_unix: now(),
            finished_unix: 0.0,
            seeds: BTreeMap::new(),
            configs: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    fn record(path: &Path) -> Result<FileRecord> {
        Ok(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }

    /// Built-in configurations are recorded by name without a hash.
    pub fn config(&mut self, path: Option<&Path>, name: &str) -> Result<()> {
        self.configs.push(match path {
            Some(p) => Self::record(p)?,
            None => FileRecord {
                path: format!("builtin:{name}"),
                sha256: String::new(),
            },
        });
        Ok(())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(Self::record(path)?);
        Ok(())
    }

    /// Writes `text` to `path` and records it as an output.
    pub fn write(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, text)?;
        self.outputs.push(Self::record(path)?);
        Ok(())
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_unix = now();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(path, text + "\n")?;
        Ok(())
    }
}
