//! Run manifests: resolved config, tool version, seed derivation and SHA-256
//! hashes of every input and output. No timestamps, so a rerun reproduces
//! the manifest byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Command;
use crate::CliError;

pub const TOOL_NAME: &str = "tmest";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedInfo {
    pub seed: u64,
    pub prng: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: Command,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<SeedInfo>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub report: serde_json::Value,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Collects hashes and report fields while a command runs.
#[derive(Debug, Default)]
pub struct Recorder {
    pub seeds: Option<SeedInfo>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub report: serde_json::Map<String, serde_json::Value>,
}

impl Recorder {
    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn report<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.report.insert(key.to_string(), v);
    }

    pub fn finish(self, config: Command, path: &Path) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            config,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            report: serde_json::Value::Object(self.report),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        std::fs::write(path, text)?;
        Ok(manifest)
    }
}

pub fn default_manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
