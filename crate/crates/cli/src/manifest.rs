//! Run manifests: enough to re-run a command and check that it reproduces
//! its outputs byte for byte.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name, with the seed made explicit and
    /// the thread count removed.
    pub command: Vec<String>,
    /// Fully resolved configuration.
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
}

pub fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Process arguments with `--threads` dropped, `--seed` normalised and the
/// `defaults` flags appended when absent.
pub fn command_line(seed: u64, defaults: &[(String, String)]) -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--threads" || a == "--seed" {
            args.next();
            continue;
        }
        if a.starts_with("--threads=") || a.starts_with("--seed=") {
            continue;
        }
        out.push(a);
    }
    for (flag, value) in defaults {
        let eq = format!("{flag}=");
        if !out.iter().any(|a| a == flag || a.starts_with(&eq)) {
            out.push(flag.clone());
            out.push(value.clone());
        }
    }
    out.push("--seed".into());
    out.push(seed.to_string());
    out
}

pub struct Recorder {
    started: Instant,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    defaults: Vec<(String, String)>,
}

impl Recorder {
    pub fn new(seed: u64, config: serde_json::Value) -> Self {
        Self {
            started: Instant::now(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            defaults: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Records a defaulted flag so the stored command does not depend on
    /// default values.
    pub fn default_arg(&mut self, flag: &str, value: &Path) {
        self.defaults.push((flag.into(), value.to_string_lossy().into_owned()));
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command_line(self.seed, &self.defaults),
            config: self.config,
            seed: self.seed,
            inputs: self.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            outputs: self.outputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `<path>.manifest.json` unless given explicitly.
pub fn default_path(primary: &Path, explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let mut s = primary.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
    }
}
