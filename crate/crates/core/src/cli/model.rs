//! Model and equation files written by the command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kan::KanNetwork;
use crate::symbolic::SymbolicExpr;
use crate::training::{predict, Channel, Dataset, NormStats, Sample, TrainConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const EQUATIONS_FORMAT_VERSION: u32 = 1;

/// One trained network and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetModel {
    pub target: Channel,
    pub config: TrainConfig,
    pub network: KanNetwork,
    /// Z-scored training targets, used as the extraction reference.
    pub train_targets: Vec<f64>,
}

/// Trained networks sharing one set of inputs and normalization stats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub inputs: Vec<Channel>,
    pub stats: NormStats,
    /// Z-scored training inputs, one row per sample.
    pub train_inputs: Vec<Vec<f64>>,
    pub models: Vec<TargetModel>,
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("model documents serialize");
    s.push('\n');
    s
}

fn from_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

fn check_version(path: &Path, found: u32, expected: u32) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::parse(
            path,
            1,
            format!("unsupported format version {found}, expected {expected}"),
        ))
    }
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let m: ModelFile = from_json(path, text)?;
        check_version(path, m.version, MODEL_FORMAT_VERSION)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn target(&self, target: Channel) -> Result<&TargetModel> {
        self.models
            .iter()
            .find(|m| m.target == target)
            .ok_or_else(|| Error::MissingChannel(format!("model has no network for {target}")))
    }

    pub fn targets(&self) -> Vec<Channel> {
        self.models.iter().map(|m| m.target).collect()
    }

    /// Physical-unit prediction of `target` from one row of physical inputs
    /// ordered as [`ModelFile::inputs`].
    pub fn predict_row(&self, target: Channel, x: &[f64]) -> Result<f64> {
        let m = self.target(target)?;
        if x.len() != self.inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.len(),
                got: x.len(),
            });
        }
        let z = self
            .inputs
            .iter()
            .zip(x)
            .map(|(c, v)| Ok(self.stats.get(*c)?.apply(*v)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.stats.get(target)?.invert(m.network.forward(&z)?[0]))
    }

    /// Physical-unit predictions of `target` on `data`.
    pub fn predict(&self, target: Channel, data: &Dataset) -> Result<Vec<f64>> {
        let m = self.target(target)?;
        let data = data.clone().with_channels(&self.inputs, target)?;
        predict(&m.network, &self.stats, &data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equation {
    pub target: Channel,
    /// Rendered right-hand side as written to the text file.
    pub text: String,
    /// Rounded expression in physical units.
    pub expr: SymbolicExpr,
}

/// Structured counterpart of the `<target> = <expression>` text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationsFile {
    pub version: u32,
    pub decimals: u32,
    pub expand: bool,
    /// Normalization of the originating model, for normalized metrics.
    pub stats: NormStats,
    pub equations: Vec<Equation>,
}

impl EquationsFile {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    /// One `<target> = <expression>` line per equation.
    pub fn to_text(&self) -> String {
        self.equations
            .iter()
            .map(|e| format!("{} = {}\n", e.target, e.text))
            .collect()
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let f: EquationsFile = from_json(path, text)?;
        check_version(path, f.version, EQUATIONS_FORMAT_VERSION)?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn equation(&self, target: Channel) -> Result<&Equation> {
        self.equations
            .iter()
            .find(|e| e.target == target)
            .ok_or_else(|| Error::MissingChannel(format!("no equation for {target}")))
    }

    pub fn targets(&self) -> Vec<Channel> {
        self.equations.iter().map(|e| e.target).collect()
    }

    /// Evaluates the equation for `target` at named channel values.
    pub fn evaluate(&self, target: Channel, point: &BTreeMap<String, f64>) -> Result<f64> {
        self.equation(target)?.expr.evaluate(point)
    }

    /// Evaluates the equation for `target` on every sample of `data`.
    pub fn predict(&self, target: Channel, data: &Dataset) -> Result<Vec<f64>> {
        let eq = self.equation(target)?;
        for name in eq.expr.variables() {
            let ch: Channel = name
                .parse()
                .map_err(|_| Error::MissingChannel(format!("equation variable `{name}`")))?;
            if ch == target {
                return Err(Error::InvalidConfig(format!(
                    "equation for {target} depends on {target}"
                )));
            }
        }
        data.samples()
            .iter()
            .map(|s| eq.expr.evaluate(&sample_point(s)))
            .collect()
    }
}

fn sample_point(s: &Sample) -> BTreeMap<String, f64> {
    Channel::ALL
        .iter()
        .map(|c| (c.name().to_string(), s.get(*c)))
        .collect()
}
