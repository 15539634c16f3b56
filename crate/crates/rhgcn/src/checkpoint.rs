//! Versioned JSON checkpoints.
//!
//! Floats are written in shortest round-trip form and read back with exact
//! parsing, so a saved model reloads bit for bit.

use std::path::Path;

use rhgcn_core::model::Params;
use rhgcn_core::{ModelConfig, RHgcn};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const FORMAT: &str = "rhgcn-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub format_version: u32,
    pub artifact_version: String,
    /// The run configuration that produced the model.
    pub config: serde_json::Value,
    pub epoch: usize,
    pub model: ModelConfig,
    pub num_features: usize,
    pub num_classes: usize,
    pub params: Params,
}

impl Checkpoint {
    pub fn new(model: &RHgcn, run: &RunConfig, epoch: usize) -> Self {
        Self {
            format: FORMAT.to_string(),
            format_version: FORMAT_VERSION,
            artifact_version: crate::VERSION.to_string(),
            config: run.to_json(),
            epoch,
            model: model.config.clone(),
            num_features: model.num_features,
            num_classes: model.num_classes,
            params: model.params.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::report::write_json(path, &serde_json::to_value(self).map_err(|e| CliError::Format(e.to_string()))?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: Checkpoint =
            serde_json::from_str(text).map_err(|e| CliError::Format(format!("checkpoint line {}: {e}", e.line())))?;
        if c.format != FORMAT {
            return Err(CliError::Format(format!("not a checkpoint: format {:?}", c.format)));
        }
        if c.format_version != FORMAT_VERSION {
            return Err(CliError::Format(format!(
                "checkpoint format version {} is not supported (expected {FORMAT_VERSION})",
                c.format_version
            )));
        }
        Ok(c)
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        RunConfig::from_json(&self.config)
    }

    /// Rebuilds the model; shapes are checked against the configuration.
    pub fn model(&self) -> Result<RHgcn, CliError> {
        let mut m = RHgcn::new(self.model.clone(), self.num_features, self.num_classes)
            .map_err(|e| CliError::Format(format!("checkpoint model: {e}")))?;
        m.params = self.params.clone();
        m.validate().map_err(|e| CliError::Format(format!("checkpoint parameters: {e}")))?;
        if !m.params.is_finite() {
            return Err(CliError::Format("checkpoint parameters are not finite".into()));
        }
        Ok(m)
    }
}
