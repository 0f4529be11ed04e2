use super::measure::SignedAtomicMeasure;
use super::w1::w1_bl;
use crate::error::{invalid, Error, Result};

/// A measure-valued path sampled at increasing times.
#[derive(Debug, Clone, Default)]
pub struct MeasurePath {
    pub times: Vec<f64>,
    pub measures: Vec<SignedAtomicMeasure>,
}

impl MeasurePath {
    pub fn new(times: Vec<f64>, measures: Vec<SignedAtomicMeasure>) -> Result<Self> {
        if times.len() != measures.len() {
            return Err(invalid("path needs one measure per sample time"));
        }
        Ok(MeasurePath { times, measures })
    }
}

/// Tolerance for matching sample times between paths.
const TIME_TOL: f64 = 1e-12;

/// Empirical d_p^c: for each realization r, max_t e^{-ct} W1(μ^r_t, ν^r_t)^p, then the
/// p-th root of the mean over realizations. `c = 0` gives d_p.
pub fn path_distance_dp(mu: &[MeasurePath], nu: &[MeasurePath], p: f64, c: f64) -> Result<f64> {
    if !(p >= 1.0) || !(c >= 0.0) {
        return Err(invalid(format!("need p >= 1 and c >= 0, got p = {p}, c = {c}")));
    }
    if mu.len() != nu.len() || mu.is_empty() {
        return Err(invalid("paths must pair up realization by realization"));
    }
    let mut acc = 0.0;
    for (a, b) in mu.iter().zip(nu) {
        if a.times.len() != b.times.len()
            || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > TIME_TOL)
        {
            return Err(Error::TimeGridMismatch);
        }
        let mut worst: f64 = 0.0;
        for ((t, m1), m2) in a.times.iter().zip(&a.measures).zip(&b.measures) {
            let w = w1_bl(m1, m2)?;
            worst = worst.max((-c * t).exp() * w.powf(p));
        }
        acc += worst;
    }
    Ok((acc / mu.len() as f64).powf(1.0 / p))
}
