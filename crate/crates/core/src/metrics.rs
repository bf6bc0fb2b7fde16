//! Trajectory metrics: stabilization point, final error and rate fits.

use crate::error::{Error, Result};
use crate::linalg;

/// Default trailing window, in recorded points.
pub const DEFAULT_WINDOW: usize = 50;

/// Default relative tolerance of the stabilization test.
pub const DEFAULT_TOL: f64 = 1e-6;

/// First recorded iteration `k_j` at which the trailing window
/// `values[j − window ..= j]` has `max − min ≤ tol·(1 + |values[j]|)`, or
/// `None` if that never happens.
pub fn stabilization_iteration(ks: &[u64], values: &[f64], window: usize, tol: f64) -> Result<Option<u64>> {
    linalg::check_dim(ks.len(), values.len())?;
    if window == 0 || window >= values.len() {
        return Err(Error::Config(alloc::format!(
            "stabilization window {window} needs 1..{} recorded points",
            values.len()
        )));
    }
    for j in window..values.len() {
        let span = &values[j - window..=j];
        let (lo, hi) = span.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi - lo <= tol * (1.0 + values[j].abs()) {
            return Ok(Some(ks[j]));
        }
    }
    Ok(None)
}

/// `‖x − x*‖` when the minimizer is known, the final objective value
/// otherwise.
pub fn final_error(x: &[f64], minimizer: Option<&[f64]>, final_value: f64) -> f64 {
    match minimizer {
        Some(m) => linalg::distance(x, m),
        None => final_value,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RateMode {
    /// `log(g − g*)` against `k`; the slope estimates `log ρ`.
    Linear,
    /// `log(g − g*)` against `log k`; the slope estimates the power.
    LogLog,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub mode: RateMode,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Number of points used.
    pub points: usize,
    /// The range was cut at the first non-positive suboptimality.
    pub truncated: bool,
}

/// Least-squares fit of `log(subopt)` over the points with
/// `k_start ≤ k ≤ k_end`. Fitting stops at the first non-positive
/// suboptimality, which is reported through [`RateFit::truncated`].
pub fn rate_fit(ks: &[u64], subopt: &[f64], k_start: u64, k_end: u64, mode: RateMode) -> Result<RateFit> {
    linalg::check_dim(ks.len(), subopt.len())?;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut count = 0usize;
    let mut truncated = false;
    for (&k, &s) in ks.iter().zip(subopt) {
        if k < k_start || k > k_end {
            continue;
        }
        if !(s > 0.0) {
            truncated = true;
            break;
        }
        let x = match mode {
            RateMode::Linear => k as f64,
            RateMode::LogLog => {
                if k == 0 {
                    continue;
                }
                libm::log(k as f64)
            }
        };
        let y = libm::log(s);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        count += 1;
    }
    if count < 2 {
        return Err(Error::Config("rate fit needs at least two positive points".into()));
    }
    let n = count as f64;
    let vxx = sxx - sx * sx / n;
    let vxy = sxy - sx * sy / n;
    let vyy = syy - sy * sy / n;
    if vxx <= 0.0 {
        return Err(Error::Config("rate fit needs distinct abscissae".into()));
    }
    let slope = vxy / vxx;
    let intercept = (sy - slope * sx) / n;
    let r2 = if vyy <= 0.0 { 1.0 } else { (vxy * vxy) / (vxx * vyy) };
    Ok(RateFit { mode, slope, intercept, r2, points: count, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn constant_record_stabilizes_at_first_window_end() {
        let ks: Vec<u64> = (0..100).map(|k| 10 * k).collect();
        let v = [3.0; 100];
        assert_eq!(stabilization_iteration(&ks, &v, 50, 1e-6).unwrap(), Some(500));
    }

    #[test]
    fn linear_decrease_never_stabilizes() {
        let ks: Vec<u64> = (0..1000).collect();
        let v: Vec<f64> = ks.iter().map(|&k| -(k as f64)).collect();
        assert_eq!(stabilization_iteration(&ks, &v, 50, 1e-6).unwrap(), None);
    }

    #[test]
    fn flat_after_500() {
        let ks: Vec<u64> = (0..2000).collect();
        let v: Vec<f64> = ks.iter().map(|&k| if k < 500 { 1000.0 - k as f64 } else { 500.0 }).collect();
        assert_eq!(stabilization_iteration(&ks, &v, 50, 1e-6).unwrap(), Some(550));
    }

    #[test]
    fn window_too_large() {
        assert!(stabilization_iteration(&[0, 1], &[1.0, 1.0], 2, 1e-6).is_err());
        assert!(stabilization_iteration(&[0, 1], &[1.0, 1.0], 0, 1e-6).is_err());
    }

    #[test]
    fn final_error_cases() {
        assert_eq!(final_error(&[1.0, 2.0], Some(&[1.0, 2.0]), 7.0), 0.0);
        assert_eq!(final_error(&[3.0], Some(&[1.0]), 7.0), 2.0);
        assert_eq!(final_error(&[3.0], None, 7.0), 7.0);
    }

    #[test]
    fn geometric_sequence() {
        let rho: f64 = 0.9;
        let ks: Vec<u64> = (0..60).collect();
        let s: Vec<f64> = ks.iter().map(|&k| libm::pow(rho, k as f64)).collect();
        let f = rate_fit(&ks, &s, 0, 59, RateMode::Linear).unwrap();
        assert!((f.slope - libm::log(rho)).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(!f.truncated);
    }

    #[test]
    fn inverse_k_sequence() {
        let ks: Vec<u64> = (1..500).collect();
        let s: Vec<f64> = ks.iter().map(|&k| 1.0 / k as f64).collect();
        let f = rate_fit(&ks, &s, 1, 499, RateMode::LogLog).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncates_at_exact_convergence() {
        let ks: Vec<u64> = (0..10).collect();
        let s = [1.0, 0.5, 0.25, 0.125, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0];
        let f = rate_fit(&ks, &s, 0, 9, RateMode::Linear).unwrap();
        assert!(f.truncated);
        assert_eq!(f.points, 4);
        assert!(rate_fit(&ks, &[0.0; 10], 0, 9, RateMode::Linear).is_err());
    }
}
