//! TOML run configuration shared by every CLI verb.
//!
//! ```toml
//! seed = 7
//!
//! [optics]
//! wavelength_m = 1.5e-6
//! repetition_rate_hz = 2.0e7
//!
//! [fit]
//! multi_starts = 8
//! weights = "poisson"        # or "binomial"
//! estimator = "least_squares" # or "binomial_ml"
//!
//! [selection]
//! i_max_min = 1
//! i_max_max = 6
//! absolute_cap = 3.0
//! relative_factor = 1.2
//!
//! [sweep]
//! dominance_threshold = 0.01
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::estimation::FitConfig;
use crate::io::optics::OpticalConfig;
use crate::model_selection::SelectionConfig;
use crate::sweep_analysis::SweepConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides `fit.seed` and scenario seeds when set.
    pub seed: Option<u64>,
    pub optics: OpticalConfig,
    pub fit: FitConfig,
    pub selection: SelectionConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| EpdcError::Config(e.to_string()))?;
        cfg.apply_seed(cfg.seed);
        cfg.optics.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| EpdcError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            EpdcError::Config(m) => EpdcError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = Some(s);
            self.fit.seed = s;
        }
    }
}
