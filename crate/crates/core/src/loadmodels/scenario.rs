//! Parametric fault-response trajectories.
//!
//! Voltage is flat before the fault, depressed during it, and after clearing
//! returns exponentially to its pre-fault level under a damped oscillation.
//! Frequency dips and oscillates at its own rate from fault inception.
//! Gaussian measurement noise scales with each channel's clean range.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Truth;
use crate::error::{Error, Result};
use crate::rng::stream;
use crate::training::{Dataset, Role, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Seconds.
    pub duration: f64,
    /// Samples per second.
    pub sample_rate: f64,
    pub fault_on: f64,
    pub fault_clear: f64,
    /// Pre-fault voltage, per unit.
    pub v_pre: f64,
    /// Voltage drop during the fault as a fraction of `v_pre`.
    pub dip_depth: f64,
    /// Time constant in seconds of the post-clear return from the fault
    /// voltage.
    pub recovery_time: f64,
    /// Post-clear oscillation frequency in Hz.
    pub osc_freq: f64,
    /// Envelope decay rate in 1/s.
    pub damping: f64,
    /// Initial oscillation amplitude as a fraction of `v_pre`.
    pub osc_amp: f64,
    pub f_nominal: f64,
    /// Peak frequency excursion in Hz.
    pub f_excursion: f64,
    pub f_osc_freq: f64,
    pub f_damping: f64,
    /// Noise standard deviation as a fraction of each channel's range.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            duration: 10.0,
            sample_rate: 120.0,
            fault_on: 1.0,
            fault_clear: 1.2,
            v_pre: 1.0,
            dip_depth: 0.35,
            recovery_time: 0.15,
            osc_freq: 1.1,
            damping: 0.45,
            osc_amp: 0.08,
            f_nominal: 60.0,
            f_excursion: 0.3,
            f_osc_freq: 0.45,
            f_damping: 0.3,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

impl Scenario {
    pub const PRESETS: [&'static str; 3] = ["busA", "busB", "busC"];

    /// Shipped scenarios: `busA` (training), `busB` (validation), `busC`
    /// (test).
    pub fn preset(name: &str) -> Result<Self> {
        let base = Scenario::default();
        let s = match name {
            "busA" => Scenario {
                name: name.into(),
                dip_depth: 0.35,
                osc_freq: 1.1,
                damping: 0.45,
                f_osc_freq: 0.45,
                seed: 101,
                ..base
            },
            "busB" => Scenario {
                name: name.into(),
                dip_depth: 0.25,
                osc_freq: 0.9,
                damping: 0.4,
                osc_amp: 0.07,
                f_excursion: 0.25,
                f_osc_freq: 0.38,
                seed: 202,
                ..base
            },
            "busC" => Scenario {
                name: name.into(),
                dip_depth: 0.45,
                osc_freq: 1.3,
                damping: 0.5,
                osc_amp: 0.09,
                f_excursion: 0.35,
                f_osc_freq: 0.52,
                seed: 303,
                ..base
            },
            other => {
                return Err(Error::InvalidScenario(format!(
                    "unknown preset `{other}` (expected one of {:?})",
                    Self::PRESETS
                )))
            }
        };
        Ok(s)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::InvalidScenario(e.message().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidScenario(m));
        let finite = [
            self.duration,
            self.sample_rate,
            self.fault_on,
            self.fault_clear,
            self.v_pre,
            self.dip_depth,
            self.recovery_time,
            self.osc_freq,
            self.damping,
            self.osc_amp,
            self.f_nominal,
            self.f_excursion,
            self.f_osc_freq,
            self.f_damping,
            self.noise_sigma,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return fail("scenario fields must be finite".into());
        }
        if !(0.0 < self.fault_on && self.fault_on < self.fault_clear && self.fault_clear < self.duration) {
            return fail(format!(
                "need 0 < fault_on < fault_clear < duration, got {} / {} / {}",
                self.fault_on, self.fault_clear, self.duration
            ));
        }
        if !(self.dip_depth > 0.0 && self.dip_depth < 1.0) {
            return fail(format!("dip_depth must lie in (0, 1), got {}", self.dip_depth));
        }
        if !(self.sample_rate > 0.0) || self.sample_count() < 2 {
            return fail("need at least two samples".into());
        }
        if !(self.v_pre > 0.0) || !(self.f_nominal > 0.0) {
            return fail("v_pre and f_nominal must be positive".into());
        }
        if self.osc_amp < 0.0 || self.osc_amp >= 1.0 {
            return fail(format!("osc_amp must lie in [0, 1), got {}", self.osc_amp));
        }
        if !(self.recovery_time > 0.0) {
            return fail("recovery_time must be positive".into());
        }
        if self.damping < 0.0 || self.f_damping < 0.0 || self.noise_sigma < 0.0 {
            return fail("damping and noise must be non-negative".into());
        }
        Ok(())
    }
}

/// Time, voltage and frequency series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
}

fn clean_trajectory(s: &Scenario) -> Result<Trajectory> {
    s.validate()?;
    let mut rng = stream(s.seed, "phase");
    let v_phase = rng.gen_range(-0.5..0.5);
    let f_phase = rng.gen_range(-0.5..0.5);
    let omega = 2.0 * PI * s.osc_freq;
    let omega_f = 2.0 * PI * s.f_osc_freq;
    let v_fault = s.v_pre * (1.0 - s.dip_depth);
    let amp = s.osc_amp * s.v_pre;

    let n = s.sample_count();
    let mut t = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n);
    for k in 0..n {
        let tk = k as f64 / s.sample_rate;
        let vk = if tk < s.fault_on {
            s.v_pre
        } else if tk < s.fault_clear {
            v_fault
        } else {
            let tau = tk - s.fault_clear;
            s.v_pre
                - (s.v_pre - v_fault) * (-tau / s.recovery_time).exp()
                - amp * (-s.damping * tau).exp() * (omega * tau + v_phase).sin()
        };
        let fk = if tk < s.fault_on {
            s.f_nominal
        } else {
            let tau = tk - s.fault_on;
            let rise = 1.0 - (-4.0 * tau).exp();
            s.f_nominal
                - s.f_excursion * rise * (-s.f_damping * tau).exp() * (omega_f * tau + f_phase).cos()
        };
        t.push(tk);
        v.push(vk);
        f.push(fk);
    }
    Ok(Trajectory { t, v, f })
}

fn add_noise(values: &mut [f64], sigma_frac: f64, seed: u64, label: &str) {
    if sigma_frac == 0.0 {
        return;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sigma = sigma_frac * (hi - lo);
    if !(sigma > 0.0) {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let mut rng = stream(seed, label);
    for x in values.iter_mut() {
        *x += normal.sample(&mut rng);
    }
}

/// Measured trajectory, including noise when `noise_sigma > 0`.
pub fn synth_trajectory(s: &Scenario) -> Result<Trajectory> {
    let mut tr = clean_trajectory(s)?;
    add_noise(&mut tr.v, s.noise_sigma, s.seed, "noise-V");
    add_noise(&mut tr.f, s.noise_sigma, s.seed, "noise-f");
    Ok(tr)
}

/// Applies `truth` to the clean trajectory, then adds measurement noise to
/// all four channels.
pub fn synth_dataset(s: &Scenario, truth: &Truth, role: Role) -> Result<Dataset> {
    truth.validate()?;
    let clean = clean_trajectory(s)?;
    let mut p = Vec::with_capacity(clean.t.len());
    let mut q = Vec::with_capacity(clean.t.len());
    for (v, f) in clean.v.iter().zip(&clean.f) {
        let (pk, qk) = truth.eval(*v, *f)?;
        p.push(pk);
        q.push(qk);
    }
    let measured = synth_trajectory(s)?;
    add_noise(&mut p, s.noise_sigma, s.seed, "noise-P");
    add_noise(&mut q, s.noise_sigma, s.seed, "noise-Q");
    let samples = (0..clean.t.len())
        .map(|k| Sample {
            t: clean.t[k],
            v: measured.v[k],
            f: measured.f[k],
            p: p[k],
            q: q[k],
        })
        .collect();
    Dataset::new(samples, role)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadmodels::{zip_eval, CompositeTruth, ZipParams};

    #[test]
    fn sample_count_and_prefault() {
        let s = Scenario::preset("busA").unwrap();
        let tr = synth_trajectory(&s).unwrap();
        assert_eq!(tr.t.len(), 1200);
        for (t, v) in tr.t.iter().zip(&tr.v) {
            if *t < s.fault_on {
                assert_eq!(*v, s.v_pre);
            }
        }
    }

    #[test]
    fn envelope_decays() {
        let s = Scenario::preset("busC").unwrap();
        let tr = synth_trajectory(&s).unwrap();
        // Peak-to-peak over consecutive oscillation periods after clearing.
        let per = (s.sample_rate / s.osc_freq).round() as usize;
        let start = tr.t.iter().position(|t| *t >= s.fault_clear).unwrap();
        let spans: Vec<f64> = tr.v[start..]
            .chunks(per)
            .filter(|c| c.len() == per)
            .map(|c| {
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo
            })
            .collect();
        assert!(spans.len() > 5);
        for w in spans.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{spans:?}");
        }
    }

    #[test]
    fn presets_stay_in_bounds_and_differ() {
        let trs: Vec<Trajectory> = Scenario::PRESETS
            .iter()
            .map(|n| synth_trajectory(&Scenario::preset(n).unwrap().with_noise(0.005)).unwrap())
            .collect();
        for tr in &trs {
            assert!(tr.v.iter().all(|v| *v > 0.0 && *v < 2.0));
        }
        for i in 0..3 {
            for j in i + 1..3 {
                let d = trs[i]
                    .v
                    .iter()
                    .zip(&trs[j].v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        let s = Scenario::preset("busB").unwrap().with_noise(0.01);
        assert_eq!(synth_trajectory(&s).unwrap(), synth_trajectory(&s).unwrap());
    }

    #[test]
    fn zip_dataset_is_exact() {
        let s = Scenario::preset("busA").unwrap();
        let z = ZipParams::default();
        let d = synth_dataset(&s, &Truth::Zip(z), Role::Train).unwrap();
        for smp in d.samples() {
            let (p, q) = zip_eval(&z, smp.v).unwrap();
            assert_eq!((smp.p, smp.q), (p, q));
        }
    }

    #[test]
    fn zero_f_coefficient_removes_f_dependence() {
        let mut c = CompositeTruth::default();
        c.p.f_coeff = 0.0;
        let (a, _) = c.eval(0.9, 59.7).unwrap();
        let (b, _) = c.eval(0.9, 60.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let bad = Scenario {
            fault_clear: 0.5,
            ..Scenario::default()
        };
        assert!(matches!(synth_trajectory(&bad), Err(Error::InvalidScenario(_))));
        let bad = Scenario {
            dip_depth: 1.0,
            ..Scenario::default()
        };
        assert!(bad.validate().is_err());
        assert!(Scenario::preset("busZ").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let s = Scenario::preset("busB").unwrap();
        let text = toml::to_string(&s).unwrap();
        assert_eq!(Scenario::from_toml(&text).unwrap(), s);
        assert!(Scenario::from_toml("dip_depth = 2.0").is_err());
        assert!(Scenario::from_toml("bogus = 1").is_err());
    }
}
