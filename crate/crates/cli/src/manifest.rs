//! Run manifests: enough to replay a run from the same files and flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lpg_core::config::HarnessConfig;
use lpg_core::eval::write_json;
use lpg_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    /// Effective configuration after the config file and flag overrides.
    pub config: HarnessConfig,
    /// sha256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub status: String,
}

impl Manifest {
    pub fn new(command: &str, argv: Vec<String>, seed: u64, config: HarnessConfig) -> Self {
        Manifest {
            tool: "lpg",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv,
            seed,
            config,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            status: "running".into(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
