use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

/// Written next to every command's outputs. Holds no timestamps or absolute
/// paths beyond what was passed in, so reruns produce identical logs.
#[derive(Debug, Serialize)]
pub struct RunLog {
    pub command: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunLog {
    pub fn new(command: &'static str, seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(mut self, p: &Path) -> Self {
        self.inputs.push(p.to_path_buf());
        self
    }

    pub fn output(mut self, p: &Path) -> Self {
        self.outputs.push(p.to_path_buf());
        self
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::write_json(path, self)
    }
}
