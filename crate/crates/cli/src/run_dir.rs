//! Output directories `out/<command>/<timestamp>-<seed>/` and their manifests.

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Passed,
    Failed,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Fully resolved configuration for the command.
    pub config: serde_json::Value,
    pub master_seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub files: Vec<FileDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub struct RunDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl RunDir {
    /// Create a fresh directory under `root/<command>/`.
    pub fn create(root: &Path, command: &str, config: serde_json::Value, seed: u64) -> Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ").to_string();
        let parent = root.join(command);
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let mut dir = parent.join(format!("{stamp}-{seed}"));
        let mut suffix = 1;
        while dir.exists() {
            dir = parent.join(format!("{stamp}-{seed}-{suffix}"));
            suffix += 1;
        }
        fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let run = RunDir {
            dir,
            manifest: RunManifest {
                command: command.to_string(),
                config,
                master_seed: seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_at: now(),
                finished_at: None,
                status: RunStatus::Running,
                error: None,
                files: Vec::new(),
            },
        };
        run.write_manifest()?;
        Ok(run)
    }

    /// Write `name` inside the run directory and record its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.files.retain(|f| f.path != name);
        self.manifest.files.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn write_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        let path = self.dir.join("manifest.json");
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn finish(mut self, passed: bool) -> Result<PathBuf> {
        self.manifest.status = if passed { RunStatus::Passed } else { RunStatus::Failed };
        self.manifest.finished_at = Some(now());
        self.write_manifest()?;
        Ok(self.dir)
    }

    /// Keep whatever was written and mark the run as failed.
    pub fn abort(mut self, message: &str) -> Result<PathBuf> {
        self.write("FAILED", format!("{message}\n").as_bytes())?;
        self.manifest.error = Some(message.to_string());
        self.finish(false)
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
