//! Rate extraction and the joint-limit order schedule.

use log::warn;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
    pub rows_used: usize,
    pub rows_dropped: usize,
}

/// Least squares of `ln gap` on `ln param`. Rows with a nonpositive or
/// non-finite value are dropped with a warning; fewer than three surviving
/// rows is a fit error.
pub fn fit_loglog_slope(rows: &[(f64, f64)]) -> Result<LogLogFit> {
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for &(param, gap) in rows {
        if param > 0.0 && gap > 0.0 && param.is_finite() && gap.is_finite() {
            xs.push(param.ln());
            ys.push(gap.ln());
        } else {
            warn!("dropping row (param = {param}, gap = {gap}) from log-log fit");
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::Fit(format!(
            "log-log fit needs at least 3 positive rows, got {n} of {}",
            rows.len()
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all parameter values are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual,
        rows_used: n,
        rows_dropped: rows.len() - n,
    })
}

/// Relative slack on the floor argument so that values that are integers in
/// exact arithmetic are not pushed below by rounding.
const FLOOR_SLACK: f64 = 1e-12;

/// `max(1, ⌊α ln N / (lip T)⌋^q)`. `N` is real-valued to allow evaluation
/// of the schedule between integer sizes.
pub fn m_schedule(n: f64, alpha: f64, q: f64, lip: f64, t_final: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::config(format!("joint-limit exponent alpha must lie in (0, 1/2), got {alpha}")));
    }
    if !(n >= 2.0) || !n.is_finite() {
        return Err(Error::domain(format!("m_schedule needs N >= 2, got {n}")));
    }
    if !(lip > 0.0) || !(t_final > 0.0) {
        return Err(Error::domain("m_schedule needs lip > 0 and T > 0"));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::domain(format!("m_schedule needs a finite q >= 1, got {q}")));
    }
    let base = (alpha * n.ln() / (lip * t_final) * (1.0 + FLOOR_SLACK)).floor();
    let m = base.powf(q).floor();
    Ok(if m < 1.0 { 1 } else { m as usize })
}
