//! Signal-based degradation and restoration measures.
//!
//! SDR values use `f64::INFINITY` for a distortion-free estimate; ΔSDR is
//! computed with [`delta_db`] so the infinite case stays well defined.

use crate::error::{DeclipError, Result};
use crate::signal::Signal;

/// Signal-to-distortion ratio in dB between two equal-length sample slices.
pub fn sdr_samples(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(DeclipError::Shape(format!(
            "reference has {} samples, estimate has {}",
            reference.len(),
            estimate.len()
        )));
    }
    let signal_energy: f64 = reference.iter().map(|x| x * x).sum();
    if signal_energy == 0.0 {
        return Err(DeclipError::DegenerateSignal(
            "SDR reference is all zeros".into(),
        ));
    }
    let distortion: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    if distortion == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal_energy / distortion).log10())
}

pub fn sdr(reference: &Signal, estimate: &Signal) -> Result<f64> {
    sdr_samples(reference.samples(), estimate.samples())
}

/// Percentage of samples whose magnitude reaches `tau`.
pub fn clipped_ratio(signal: &Signal, tau: f64) -> f64 {
    clipped_ratio_samples(signal.samples(), tau)
}

pub fn clipped_ratio_samples(samples: &[f64], tau: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let clipped = samples.iter().filter(|x| x.abs() >= tau).count();
    100.0 * clipped as f64 / samples.len() as f64
}

/// `after - before` with `inf - inf = 0` (no change between two perfect
/// estimates) and `inf - finite = inf`.
pub fn delta_db(after: f64, before: f64) -> f64 {
    if after.is_infinite() && before.is_infinite() && after.signum() == before.signum() {
        0.0
    } else {
        after - before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub input_sdr: f64,
    pub output_sdr: f64,
    pub delta_sdr: f64,
    /// Percent of samples at or above the threshold in the degraded signal.
    pub clipped_ratio: f64,
    pub tau: f64,
    /// Processing time divided by signal duration; NaN when unknown.
    pub runtime_ratio: f64,
}

/// Scores a restoration. `runtime_secs` is wall-clock solve time, converted
/// to a ratio against the duration of `clean`.
pub fn evaluate(
    clean: &Signal,
    clipped: &Signal,
    restored: &Signal,
    tau: f64,
    runtime_secs: Option<f64>,
) -> Result<EvalReport> {
    let input_sdr = sdr(clean, clipped)?;
    let output_sdr = sdr(clean, restored)?;
    let duration = clean.duration_secs();
    let runtime_ratio = match runtime_secs {
        Some(secs) if duration > 0.0 => secs / duration,
        _ => f64::NAN,
    };
    Ok(EvalReport {
        input_sdr,
        output_sdr,
        delta_sdr: delta_db(output_sdr, input_sdr),
        clipped_ratio: clipped_ratio(clipped, tau),
        tau,
        runtime_ratio,
    })
}
