//! Run manifests: one `manifest.json` per output directory recording the
//! resolved configuration, seeds, and SHA-256 digests of every input and
//! output file.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "clamr-manifest";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub command: String,
    /// Digest prefix of the command, configuration and input digests.
    pub run_id: String,
    pub software: Software,
    pub created_unix: u64,
    pub seeds: serde_json::Value,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Output paths are relative to the manifest's directory.
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn digest_input(role: &str, path: &Path) -> CliResult<FileDigest> {
    Ok(FileDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256: sha256_file(path)?,
    })
}

impl Manifest {
    /// The run id is fixed by everything that determines the numeric outputs,
    /// so equal manifests up to `created_unix` mean equal outputs.
    pub fn new(command: &str, config: serde_json::Value, seeds: serde_json::Value, inputs: Vec<FileDigest>) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update(config.to_string().as_bytes());
        h.update(seeds.to_string().as_bytes());
        for d in &inputs {
            h.update(d.role.as_bytes());
            h.update(d.sha256.as_bytes());
        }
        let run_id = hex::encode(h.finalize())[..16].to_string();
        Self {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            command: command.into(),
            run_id,
            software: Software {
                name: "clamr".into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            seeds,
            config,
            inputs,
            outputs: Vec::new(),
        }
    }

    pub fn input(&self, role: &str) -> Option<&FileDigest> {
        self.inputs.iter().find(|d| d.role == role)
    }

    pub fn output(&self, role: &str) -> Option<&FileDigest> {
        self.outputs.iter().find(|d| d.role == role)
    }

    /// Records the digests of the named files in `dir` and writes the manifest
    /// alongside them.
    pub fn finish(mut self, dir: &Path, outputs: &[(&str, &str)]) -> CliResult<Self> {
        for &(role, file) in outputs {
            self.outputs.push(FileDigest {
                role: role.into(),
                path: file.into(),
                sha256: sha256_file(&dir.join(file))?,
            });
        }
        let text = serde_json::to_string_pretty(&self).map_err(CliError::sampler)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
            .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        Ok(self)
    }

    /// Reads the manifest of a run directory.
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::lineage(format!("{}: {e}", path.display())))?;
        let m: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::lineage(format!("{}: {e}", path.display())))?;
        if m.format != MANIFEST_FORMAT || m.version != MANIFEST_VERSION {
            return Err(CliError::lineage(format!(
                "{}: unsupported manifest {} v{}",
                path.display(),
                m.format,
                m.version
            )));
        }
        Ok(m)
    }

    /// Checks that the output recorded under `role` is unchanged and returns
    /// its path.
    pub fn verify_output(&self, dir: &Path, role: &str) -> CliResult<PathBuf> {
        let d = self
            .output(role)
            .ok_or_else(|| CliError::lineage(format!("run {} records no {role} output", self.run_id)))?;
        let path = dir.join(&d.path);
        let actual = sha256_file(&path).map_err(CliError::lineage)?;
        if actual != d.sha256 {
            return Err(CliError::lineage(format!(
                "{} does not match the digest recorded by run {}",
                path.display(),
                self.run_id
            )));
        }
        Ok(path)
    }
}

/// Creates `dir` and refuses to mix runs: an existing manifest there is an
/// input error unless `force` is set.
pub fn prepare_output_dir(dir: &Path, force: bool) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    if !force && dir.join(MANIFEST_FILE).exists() {
        return Err(CliError::input(format!(
            "{} already holds a run; pass --force to overwrite it",
            dir.display()
        )));
    }
    Ok(())
}
