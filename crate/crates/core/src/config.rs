//! Experiment configuration: one JSON document holding every module's
//! parameters. Missing keys take their defaults; the resolved document is
//! what gets written next to the outputs and hashed.

use crate::error::{Error, Result};
use crate::readout::ReadoutConfig;
use crate::reservoir::{digest_json, SimConfig};
use crate::signals::MgParams;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub simulation: SimConfig,
    pub signal: MgParams,
    pub readout: ReadoutConfig,
    pub h_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            simulation: SimConfig::default(),
            signal: MgParams::default(),
            readout: ReadoutConfig::default(),
            h_list: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 20, 25],
            k_list: vec![0, 1, 3, 5, 10],
            seed: 0x5EED,
            out_dir: "out".into(),
        }
    }
}

/// Turn a serde_json error into `source:line:column: message`.
fn anchored(source: &str, e: serde_json::Error) -> Error {
    let msg = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    let msg = msg.strip_suffix(&suffix).unwrap_or(&msg);
    Error::config(format!("{source}:{}:{}: {msg}", e.line(), e.column()))
}

impl ExperimentConfig {
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| anchored(source, e))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{source}: {m}")),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.simulation.validate()?;
        self.signal.validate()?;
        self.readout.validate()?;
        if self.h_list.is_empty() || self.k_list.is_empty() {
            return Err(Error::config("h_list and k_list must be non-empty"));
        }
        if self.h_list.contains(&0) {
            return Err(Error::config("h_list entries must be >= 1"));
        }
        Ok(())
    }

    /// Fully resolved document, defaults included.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Serialisation written next to run outputs. Execution-only settings
    /// (worker count, output directory) are dropped so that the file depends
    /// only on what determines the results; reloading restores their defaults.
    pub fn persisted_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        v["simulation"].as_object_mut().expect("object").remove("workers");
        v.as_object_mut().expect("object").remove("out_dir");
        serde_json::to_string_pretty(&v).expect("config serialises")
    }

    /// Content digest; the worker count and output directory are excluded.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.simulation.workers = 0;
        canonical.out_dir.clear();
        digest_json(&canonical)
    }
}
