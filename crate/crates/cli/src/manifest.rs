//! Run manifests: which command ran, with what config, over which input
//! bytes, producing which outputs. Contains no timestamps or host state, so
//! re-running a stage with unchanged inputs yields a byte-identical manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{Failure, Stage, StageResult};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    /// sha256 of every input file, keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every artifact this run wrote, keyed by path.
    pub outputs: BTreeMap<String, String>,
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String, Failure> {
    let bytes = fs::read(path.as_ref()).map_err(|e| {
        Failure::Data(format!("cannot digest {}: {e}", path.as_ref().display()))
    })?;
    Ok(format!("sha256:{:x}", Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &str, config: impl Serialize) -> StageResult<Manifest> {
        let config = serde_json::to_value(config).stage("manifest")?;
        Ok(Manifest {
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn record_input(&mut self, path: &str) -> StageResult<()> {
        let digest = file_digest(path).stage("manifest")?;
        self.inputs.insert(path.to_string(), digest);
        Ok(())
    }

    pub fn record_output(&mut self, path: &str) -> StageResult<()> {
        let digest = file_digest(path).stage("manifest")?;
        self.outputs.insert(path.to_string(), digest);
        Ok(())
    }

    /// Writes the manifest itself; call last, after all outputs exist.
    pub fn write(&self, path: &str) -> StageResult<()> {
        let mut text = serde_json::to_string_pretty(self).stage("manifest")?;
        text.push('\n');
        fs::write(path, text)
            .map_err(|e| Failure::Data(format!("cannot write {path}: {e}")))
            .stage("manifest")
    }
}
