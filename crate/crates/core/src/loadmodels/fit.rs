//! Least-squares fits of the classical static load models.

use super::{ExpParams, ZipParams};
use crate::error::{Error, Result};
use crate::linalg::lstsq;
use crate::training::lbfgs::{lbfgs_minimize, LbfgsConfig};
use crate::training::{Channel, Dataset};

/// Mean voltage before `fault_on`, or the first sample when the record
/// starts later.
pub fn prefault_voltage(data: &Dataset, fault_on: f64) -> f64 {
    let pre: Vec<f64> = data
        .samples()
        .iter()
        .filter(|s| s.t < fault_on)
        .map(|s| s.v)
        .collect();
    if pre.is_empty() {
        data.samples()[0].v
    } else {
        pre.iter().sum::<f64>() / pre.len() as f64
    }
}

fn distinct_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn check_v0(v0: f64) -> Result<()> {
    if v0 > 0.0 && v0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("V0 must be positive, got {v0}")))
    }
}

/// `(scale, [Z, I, P] fractions)` of one target.
fn zip_target(ratios: &[f64], y: &[f64], name: &str) -> Result<(f64, [f64; 3])> {
    let rows: Vec<Vec<f64>> = ratios.iter().map(|r| vec![r * r, *r, 1.0]).collect();
    let k = lstsq(&rows, y).map_err(|e| Error::DegenerateFit(format!("ZIP fit of {name}: {e}")))?;
    let total = k[0] + k[1] + k[2];
    let scale = k.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(total.abs() > 1e-12 * scale) {
        return Err(Error::DegenerateFit(format!(
            "ZIP fit of {name} has zero nominal power"
        )));
    }
    Ok((total, [k[0] / total, k[1] / total, k[2] / total]))
}

/// Regresses P and Q separately on `[(V/V0)^2, V/V0, 1]`.
pub fn fit_zip_ls(data: &Dataset, v0: f64) -> Result<ZipParams> {
    check_v0(v0)?;
    let v = data.channel(Channel::V);
    if distinct_count(&v) < 3 {
        return Err(Error::DegenerateFit(
            "ZIP fit needs at least three distinct voltages".into(),
        ));
    }
    let ratios: Vec<f64> = v.iter().map(|x| x / v0).collect();
    let (p0, [az, ai, ap]) = zip_target(&ratios, &data.channel(Channel::P), "P")?;
    let (q0, [bz, bi, bp]) = zip_target(&ratios, &data.channel(Channel::Q), "Q")?;
    Ok(ZipParams {
        p0,
        q0,
        v0,
        az,
        ai,
        ap,
        bz,
        bi,
        bp,
    })
}

/// `(scale, exponent)` of `y = scale * r^n`.
fn exp_target(ratios: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if y.iter().all(|v| *v > 0.0) {
        let rows: Vec<Vec<f64>> = ratios.iter().map(|r| vec![1.0, r.ln()]).collect();
        let ln_y: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let k = lstsq(&rows, &ln_y)
            .map_err(|e| Error::DegenerateFit(format!("exponential fit: {e}")))?;
        return Ok((k[0].exp(), k[1]));
    }
    exp_nonlinear(ratios, y)
}

/// Direct least squares on `scale * r^n`: a coarse scan over `n` with the
/// closed-form scale, then an L-BFGS polish.
fn exp_nonlinear(ratios: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
    if !(rms > 0.0) {
        return Ok((0.0, 0.0));
    }
    let yn: Vec<f64> = y.iter().map(|v| v / rms).collect();
    let closed = |n: f64| {
        let (mut num, mut den) = (0.0, 0.0);
        for (r, t) in ratios.iter().zip(&yn) {
            let x = r.powf(n);
            num += x * t;
            den += x * x;
        }
        let s = num / den;
        let sse: f64 = ratios
            .iter()
            .zip(&yn)
            .map(|(r, t)| (s * r.powf(n) - t).powi(2))
            .sum();
        (s, sse)
    };
    let mut best = (0.0, 0.0, f64::INFINITY);
    for k in 0..=400 {
        let n = -10.0 + 0.05 * k as f64;
        let (s, sse) = closed(n);
        if sse < best.2 {
            best = (s, n, sse);
        }
    }
    let m = ratios.len() as f64;
    let objective = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (s, n) = (p[0], p[1]);
        let (mut f, mut gs, mut gn) = (0.0, 0.0, 0.0);
        for (r, t) in ratios.iter().zip(&yn) {
            let x = r.powf(n);
            let e = s * x - t;
            f += e * e;
            gs += 2.0 * e * x;
            gn += 2.0 * e * s * x * r.ln();
        }
        Ok((f / m, vec![gs / m, gn / m]))
    };
    let cfg = LbfgsConfig {
        grad_tol: 1e-12,
        ..Default::default()
    };
    let (p, _) = lbfgs_minimize(objective, &[best.0, best.1], &cfg)?;
    Ok((p[0] * rms, p[1]))
}

/// Log-linear least squares on `ln y = ln y0 + n ln(V/V0)` per target, or a
/// direct nonlinear fit when a target has non-positive values.
pub fn fit_exp_ls(data: &Dataset, v0: f64) -> Result<ExpParams> {
    check_v0(v0)?;
    let v = data.channel(Channel::V);
    if v.iter().any(|x| *x <= 0.0) {
        return Err(Error::DegenerateFit(
            "exponential fit needs positive voltages".into(),
        ));
    }
    if distinct_count(&v) < 2 {
        return Err(Error::DegenerateFit(
            "exponential fit needs a voltage range".into(),
        ));
    }
    let ratios: Vec<f64> = v.iter().map(|x| x / v0).collect();
    let (p0, np) = exp_target(&ratios, &data.channel(Channel::P))?;
    let (q0, nq) = exp_target(&ratios, &data.channel(Channel::Q))?;
    Ok(ExpParams { p0, q0, v0, np, nq })
}
