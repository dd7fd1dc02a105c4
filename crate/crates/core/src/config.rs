//! The harness configuration document.
//!
//! A single JSON file; every section and field is optional and falls back to
//! its default. Unknown fields are rejected. Example:
//!
//! ```json
//! {
//!   "fit": {"learning_rate": 0.03, "epochs": 1, "latent_dim": 10},
//!   "data": {"episodes_per_pair": 100, "agent": {"episodes_per_stage": 2000}},
//!   "elo_holdout_folds": 4,
//!   "cv_folds": 4,
//!   "sweep_dims": [1, 2, 4, 8, 10, 16, 32],
//!   "check": {"gradient_draws": 100}
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::CheckConfig;
use crate::error::{Error, Result};
use crate::fit::{FitConfig, ModelVariant};
use crate::maze::DataGenConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub fit: FitConfig,
    pub data: DataGenConfig,
    pub elo_holdout_folds: usize,
    pub cv_folds: usize,
    /// Variants scored by `eval`.
    pub variants: Vec<ModelVariant>,
    pub sweep_dims: Vec<usize>,
    pub check: CheckConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            fit: FitConfig::default(),
            data: DataGenConfig::default(),
            elo_holdout_folds: 4,
            cv_folds: 4,
            variants: vec![ModelVariant::Full],
            sweep_dims: (1..=32).collect(),
            check: CheckConfig::default(),
        }
    }
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: HarnessConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fit.validate()?;
        self.data.agent.validate()?;
        if self.data.episodes_per_pair == 0 {
            return Err(Error::Invalid("data.episodes_per_pair must be positive".into()));
        }
        if self.elo_holdout_folds < 2 || self.cv_folds < 2 {
            return Err(Error::Invalid("fold counts must be at least 2".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Invalid("variants must not be empty".into()));
        }
        if self.sweep_dims.contains(&0) {
            return Err(Error::Invalid("sweep_dims must be positive".into()));
        }
        Ok(())
    }
}
