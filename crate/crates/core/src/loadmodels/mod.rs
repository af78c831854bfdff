//! Static load models, synthetic disturbance data, and the classical
//! baselines.

pub mod fit;
pub mod mlp;
pub mod scenario;

pub use fit::{fit_exp_ls, fit_zip_ls, prefault_voltage};
pub use mlp::{mlp_baseline, Mlp, MlpConfig, MlpModel, MlpReport};
pub use scenario::{synth_dataset, synth_trajectory, Scenario, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_voltage(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            node: "V".into(),
            detail: format!("voltage must be positive, got {v}"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZipParams {
    pub p0: f64,
    pub q0: f64,
    pub v0: f64,
    pub az: f64,
    pub ai: f64,
    pub ap: f64,
    pub bz: f64,
    pub bi: f64,
    pub bp: f64,
}

impl ZipParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v0 > 0.0) {
            return Err(Error::InvalidConfig(format!("V0 must be positive, got {}", self.v0)));
        }
        let sp = self.az + self.ai + self.ap;
        let sq = self.bz + self.bi + self.bp;
        if (sp - 1.0).abs() > 1e-9 || (sq - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "ZIP fractions must sum to 1, got {sp} and {sq}"
            )));
        }
        Ok(())
    }

    /// Polynomial coefficients `[V^2, V, 1]` of P in raw voltage.
    pub fn p_poly(&self) -> [f64; 3] {
        let v0 = self.v0;
        [
            self.p0 * self.az / (v0 * v0),
            self.p0 * self.ai / v0,
            self.p0 * self.ap,
        ]
    }

    pub fn q_poly(&self) -> [f64; 3] {
        let v0 = self.v0;
        [
            self.q0 * self.bz / (v0 * v0),
            self.q0 * self.bi / v0,
            self.q0 * self.bp,
        ]
    }
}

impl Default for ZipParams {
    fn default() -> Self {
        Self {
            p0: 1767.0,
            q0: 100.0,
            v0: 1.0,
            az: 0.4,
            ai: 0.35,
            ap: 0.25,
            bz: 0.6,
            bi: 0.25,
            bp: 0.15,
        }
    }
}

pub fn zip_eval(p: &ZipParams, v: f64) -> Result<(f64, f64)> {
    check_voltage(v)?;
    let r = v / p.v0;
    Ok((
        p.p0 * (p.az * r * r + p.ai * r + p.ap),
        p.q0 * (p.bz * r * r + p.bi * r + p.bp),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpParams {
    pub p0: f64,
    pub q0: f64,
    pub v0: f64,
    pub np: f64,
    pub nq: f64,
}

impl Default for ExpParams {
    fn default() -> Self {
        Self {
            p0: 1767.0,
            q0: 100.0,
            v0: 1.0,
            np: 1.3,
            nq: 2.4,
        }
    }
}

pub fn exp_eval(p: &ExpParams, v: f64) -> Result<(f64, f64)> {
    check_voltage(v)?;
    let r = v / p.v0;
    Ok((p.p0 * r.powf(p.np), p.q0 * r.powf(p.nq)))
}

/// One target of [`CompositeTruth`]:
/// `c2 V^2 + c1 V + c0 + exp_amp e^(exp_rate V) + sq_amp (V + sq_shift)^2 + f_coeff f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeTerms {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub exp_amp: f64,
    pub exp_rate: f64,
    pub sq_amp: f64,
    pub sq_shift: f64,
    pub f_coeff: f64,
}

impl CompositeTerms {
    pub fn eval(&self, v: f64, f: f64) -> f64 {
        let s = v + self.sq_shift;
        self.c2 * v * v
            + self.c1 * v
            + self.c0
            + self.exp_amp * (self.exp_rate * v).exp()
            + self.sq_amp * s * s
            + self.f_coeff * f
    }

    fn is_finite(&self) -> bool {
        [
            self.c2,
            self.c1,
            self.c0,
            self.exp_amp,
            self.exp_rate,
            self.sq_amp,
            self.sq_shift,
            self.f_coeff,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Ground truth mixing polynomial, exponential, squared-affine and linear
/// frequency terms, standing in for a composite load with distributed
/// generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeTruth {
    pub p: CompositeTerms,
    pub q: CompositeTerms,
}

impl Default for CompositeTruth {
    fn default() -> Self {
        Self {
            p: CompositeTerms {
                c2: 300.0,
                c1: 450.0,
                c0: -22_800.0,
                exp_amp: 60.0,
                exp_rate: 1.5,
                sq_amp: 0.0,
                sq_shift: 0.0,
                f_coeff: 400.0,
            },
            q: CompositeTerms {
                c2: 0.0,
                c1: 600.0,
                c0: 9_000.0,
                exp_amp: 0.0,
                exp_rate: 0.0,
                sq_amp: -120.0,
                sq_shift: 0.5,
                f_coeff: -150.0,
            },
        }
    }
}

impl CompositeTruth {
    pub fn validate(&self) -> Result<()> {
        if self.p.is_finite() && self.q.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig("composite coefficients must be finite".into()))
        }
    }

    pub fn eval(&self, v: f64, f: f64) -> Result<(f64, f64)> {
        check_voltage(v)?;
        Ok((self.p.eval(v, f), self.q.eval(v, f)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Truth {
    Zip(ZipParams),
    Exponential(ExpParams),
    Composite(CompositeTruth),
}

impl Truth {
    pub fn validate(&self) -> Result<()> {
        match self {
            Truth::Zip(p) => p.validate(),
            Truth::Exponential(p) => {
                if p.v0 > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("V0 must be positive".into()))
                }
            }
            Truth::Composite(c) => c.validate(),
        }
    }

    pub fn eval(&self, v: f64, f: f64) -> Result<(f64, f64)> {
        match self {
            Truth::Zip(p) => zip_eval(p, v),
            Truth::Exponential(p) => exp_eval(p, v),
            Truth::Composite(c) => c.eval(v, f),
        }
    }
}
