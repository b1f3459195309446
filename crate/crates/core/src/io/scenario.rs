//! Scenario files for `epdc synth`: one or more synthetic scenarios keyed
//! by bias current.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EpdcError, Result};
use crate::synthetic_bench::{generate_dataset, SyntheticScenario};
use crate::sweep_analysis::{BiasCurrent, SweepData};

pub const SCENARIO_SCHEMA: &str = "epdc.scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasScenario {
    #[serde(rename = "bias_current_uA")]
    pub bias_current_ua: f64,
    #[serde(flatten)]
    pub scenario: SyntheticScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub schema: String,
    pub scenarios: Vec<BiasScenario>,
}

impl ScenarioFile {
    pub fn new(scenarios: Vec<BiasScenario>) -> Self {
        ScenarioFile { schema: SCENARIO_SCHEMA.into(), scenarios }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| EpdcError::Validation(format!("scenario file: {e}")))?;
        if file.schema != SCENARIO_SCHEMA {
            return Err(EpdcError::Validation(format!("unsupported scenario schema '{}'", file.schema)));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| EpdcError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Replaces every scenario seed with `seed + index`.
    pub fn reseed(&mut self, seed: u64) {
        for (k, s) in self.scenarios.iter_mut().enumerate() {
            s.scenario.seed = seed.wrapping_add(k as u64);
        }
    }

    /// Generates every scenario; bias currents must be distinct.
    pub fn synthesize(&self) -> Result<SweepData> {
        if self.scenarios.is_empty() {
            return Err(EpdcError::Arity("scenario file lists no scenarios".into()));
        }
        let mut out = SweepData::new();
        for s in &self.scenarios {
            let data = generate_dataset(&s.scenario)?;
            if out.insert(BiasCurrent(s.bias_current_ua), data).is_some() {
                return Err(EpdcError::Validation(format!("bias current {} appears twice", s.bias_current_ua)));
            }
        }
        Ok(out)
    }
}
