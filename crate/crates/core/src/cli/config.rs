//! Run configuration loaded from a TOML file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loadmodels::{MlpConfig, Scenario, Truth};
use crate::symbolic::ExtractConfig;
use crate::training::TrainConfig;

/// Every section is optional. `scenarios` replaces shipped presets by name.
///
/// ```toml
/// [train]
/// reg_weight = 1e-4
///
/// [extract]
/// r2_threshold = 0.995
///
/// [truth]
/// kind = "zip"
/// p0 = 1500.0
/// # ...
///
/// [scenarios.busA]
/// dip_depth = 0.3
/// seed = 11
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub extract: ExtractConfig,
    pub mlp: MlpConfig,
    pub truth: Option<Truth>,
    pub scenarios: BTreeMap<String, Scenario>,
}

impl RunConfig {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(1);
            Error::parse(path, line, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Loads `path` when given, else the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// The named preset, replaced by a same-named `scenarios` entry.
    pub fn scenario(&self, name: &str) -> Result<Scenario> {
        match self.scenarios.get(name) {
            Some(s) => {
                let mut s = s.clone();
                if s.name == Scenario::default().name {
                    s.name = name.to_string();
                }
                s.validate()?;
                Ok(s)
            }
            None => Scenario::preset(name),
        }
    }
}
