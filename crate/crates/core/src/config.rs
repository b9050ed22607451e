//! TOML configuration for fitting and simulation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::inference::OptimizeOptions;
use crate::model::ModelOptions;
use crate::{Error, Result};

/// Everything the fit command needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// cells per side of the spatial lattice in the archive
    pub lattice_resolution: usize,
    /// compute the per-site trend tables (the all-sites trend is always kept)
    pub site_tables: bool,
    pub model: ModelOptions,
    pub optimizer: OptimizeOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lattice_resolution: 50,
            site_tables: true,
            model: ModelOptions::default(),
            optimizer: OptimizeOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        let m = &self.model;
        if !(1..=3).contains(&m.spde_alpha) {
            return Err(Error::InvalidConfig(format!("spde_alpha must be 1, 2 or 3, got {}", m.spde_alpha)));
        }
        if !(m.max_edge > 0.0) {
            return Err(Error::InvalidConfig("max_edge must be positive".into()));
        }
        if !(m.component_jitter >= 0.0) || !(m.intercept_precision > 0.0) {
            return Err(Error::InvalidConfig(
                "component_jitter must be non-negative and intercept_precision positive".into(),
            ));
        }
        if self.lattice_resolution == 0 {
            return Err(Error::InvalidConfig("lattice_resolution must be positive".into()));
        }
        Ok(())
    }
}
