//! Measurement datasets, Z-score normalization, and the `time,V,f,P,Q` CSV
//! format.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact CSV header for datasets.
pub const CSV_HEADER: &str = "time,V,f,P,Q";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    V,
    #[serde(rename = "f")]
    F,
    P,
    Q,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::V, Channel::F, Channel::P, Channel::Q];

    /// Column / variable name.
    pub fn name(self) -> &'static str {
        match self {
            Channel::V => "V",
            Channel::F => "f",
            Channel::P => "P",
            Channel::Q => "Q",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Channel::V),
            "f" | "F" => Ok(Channel::F),
            "P" | "p" => Ok(Channel::P),
            "Q" | "q" => Ok(Channel::Q),
            other => Err(Error::InvalidConfig(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub v: f64,
    pub f: f64,
    pub p: f64,
    pub q: f64,
}

impl Sample {
    pub fn get(&self, ch: Channel) -> f64 {
        match ch {
            Channel::V => self.v,
            Channel::F => self.f,
            Channel::P => self.p,
            Channel::Q => self.q,
        }
    }

    pub fn set(&mut self, ch: Channel, value: f64) {
        match ch {
            Channel::V => self.v = value,
            Channel::F => self.f = value,
            Channel::P => self.p = value,
            Channel::Q => self.q = value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    role: Role,
    inputs: Vec<Channel>,
    target: Channel,
}

impl Dataset {
    /// Validates ordering and finiteness. Channels default to inputs `V, f`
    /// and target `P`.
    pub fn new(samples: Vec<Sample>, role: Role) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSize(format!(
                "dataset needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        for (k, s) in samples.iter().enumerate() {
            if ![s.t, s.v, s.f, s.p, s.q].iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("sample {k}")));
            }
            if k > 0 && s.t <= samples[k - 1].t {
                return Err(Error::InvalidConfig(format!(
                    "time not strictly increasing at sample {k}"
                )));
            }
        }
        Ok(Self {
            samples,
            role,
            inputs: vec![Channel::V, Channel::F],
            target: Channel::P,
        })
    }

    pub fn with_channels(mut self, inputs: &[Channel], target: Channel) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("no input channels".into()));
        }
        if inputs.contains(&target) {
            return Err(Error::InvalidConfig(format!(
                "target {target} is also an input"
            )));
        }
        self.inputs = inputs.to_vec();
        self.target = target;
        Ok(self)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn inputs(&self) -> &[Channel] {
        &self.inputs
    }

    pub fn target(&self) -> Channel {
        self.target
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn channel(&self, ch: Channel) -> Vec<f64> {
        self.samples.iter().map(|s| s.get(ch)).collect()
    }

    /// Row-major input matrix in `inputs()` order.
    pub fn input_rows(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| self.inputs.iter().map(|c| s.get(*c)).collect())
            .collect()
    }

    pub fn target_values(&self) -> Vec<f64> {
        self.channel(self.target)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        self.std * z + self.mean
    }
}

/// Per-channel population mean and standard deviation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    channels: BTreeMap<Channel, ChannelStats>,
}

impl NormStats {
    /// Fits the dataset's input and target channels.
    pub fn fit(data: &Dataset) -> Result<Self> {
        let mut chans = data.inputs().to_vec();
        chans.push(data.target());
        Self::fit_channels(data, &chans)
    }

    pub fn fit_channels(data: &Dataset, channels: &[Channel]) -> Result<Self> {
        let mut out = BTreeMap::new();
        for &ch in channels {
            let values = data.channel(ch);
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            if !(std > 0.0) || std <= 1e-12 * mean.abs() {
                return Err(Error::DegenerateChannel(ch.name().to_string()));
            }
            out.insert(ch, ChannelStats { mean, std });
        }
        Ok(Self { channels: out })
    }

    pub fn from_map(channels: BTreeMap<Channel, ChannelStats>) -> Self {
        Self { channels }
    }

    pub fn get(&self, ch: Channel) -> Result<ChannelStats> {
        self.channels
            .get(&ch)
            .copied()
            .ok_or_else(|| Error::MissingChannel(ch.name().to_string()))
    }

    pub fn channels(&self) -> impl Iterator<Item = (Channel, ChannelStats)> + '_ {
        self.channels.iter().map(|(c, s)| (*c, *s))
    }

    fn required(data: &Dataset) -> Vec<Channel> {
        let mut chans = data.inputs().to_vec();
        chans.push(data.target());
        chans
    }

    fn map(&self, data: &Dataset, f: impl Fn(ChannelStats, f64) -> f64) -> Result<Dataset> {
        let required = Self::required(data);
        for ch in &required {
            self.get(*ch)?;
        }
        let mut out = data.clone();
        for s in out.samples.iter_mut() {
            for (ch, stats) in &self.channels {
                s.set(*ch, f(*stats, s.get(*ch)));
            }
        }
        Ok(out)
    }

    /// `(x - mean) / std` on every channel held by the stats.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, |s, x| s.apply(x))
    }

    /// `std * z + mean`, the exact inverse of [`NormStats::apply`].
    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        self.map(data, |s, z| s.invert(z))
    }
}

fn fmt_value(x: f64) -> String {
    format!("{x:?}")
}

/// Renders a dataset in the `time,V,f,P,Q` format.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::with_capacity(data.len() * 80);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in data.samples() {
        let row = [s.t, s.v, s.f, s.p, s.q].map(fmt_value).join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, dataset_to_csv(data)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path, role: Role) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(path, &text, role)
}

/// Parses CSV text; `path` is only used in error messages.
pub fn parse_csv(path: &Path, text: &str, role: Role) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let columns: Vec<&str> = CSV_HEADER.split(',').collect();
    let mut samples = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line_of = |r: &csv::StringRecord| r.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(k as u64 + 1);
            Error::parse(path, line, e.to_string())
        })?;
        let line = line_of(&record);
        if k == 0 {
            let header: Vec<&str> = record.iter().collect();
            if header != columns {
                return Err(Error::parse(
                    path,
                    line,
                    format!("expected header `{CSV_HEADER}`, found `{}`", header.join(",")),
                ));
            }
            continue;
        }
        if record.len() != columns.len() {
            return Err(Error::parse(
                path,
                line,
                format!("expected {} fields, found {}", columns.len(), record.len()),
            ));
        }
        let mut vals = [0.0; 5];
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(
                    path,
                    line,
                    format!("column `{}`: invalid number `{field}`", columns[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("column `{}`: non-finite value", columns[c]),
                ));
            }
            vals[c] = v;
        }
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if vals[0] <= prev {
                return Err(Error::parse(
                    path,
                    line,
                    "column `time`: not strictly increasing",
                ));
            }
        }
        samples.push(Sample {
            t: vals[0],
            v: vals[1],
            f: vals[2],
            p: vals[3],
            q: vals[4],
        });
    }
    if samples.len() < 2 {
        return Err(Error::parse(
            path,
            samples.len() as u64 + 1,
            "dataset needs at least 2 rows",
        ));
    }
    Dataset::new(samples, role)
}
