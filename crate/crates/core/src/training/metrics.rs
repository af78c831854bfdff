use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error metrics of a prediction series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
}

impl Metrics {
    pub const ZERO: Metrics = Metrics {
        mse: 0.0,
        rmse: 0.0,
        mae: 0.0,
    };
}

pub fn metrics(pred: &[f64], actual: &[f64]) -> Result<Metrics> {
    if pred.len() != actual.len() {
        return Err(Error::LengthMismatch {
            expected: actual.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidSize("metrics need at least one sample".into()));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, a) in pred.iter().zip(actual) {
        let e = p - a;
        se += e * e;
        ae += e.abs();
    }
    let mse = se / n;
    Ok(Metrics {
        mse,
        rmse: mse.sqrt(),
        mae: ae / n,
    })
}

/// Metrics in the Z-score space of the target: both series are mapped
/// through `(x - mean) / std` first.
pub fn normalized_metrics(pred: &[f64], actual: &[f64], mean: f64, std: f64) -> Result<Metrics> {
    let z = |v: &[f64]| v.iter().map(|x| (x - mean) / std).collect::<Vec<_>>();
    metrics(&z(pred), &z(actual))
}
