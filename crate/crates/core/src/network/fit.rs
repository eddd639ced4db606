use serde::{Deserialize, Serialize};

use super::sweep::RemovalSweep;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Points enter the fit while `Q / Q(0)` lies in this closed range.
    pub window: [f64; 2],
    /// The collapse is the first point where `Q` drops below this fraction of
    /// all nodes; `f_c` is never placed past it.
    pub collapse_level: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            window: [0.01, 0.5],
            collapse_level: 0.01,
            min_points: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFit {
    pub f_c: f64,
    /// `beta` in `Q ~ (f_c - f)^beta`.
    pub exponent: f64,
    /// Range of `f` used by the fit.
    pub fit_window: [f64; 2],
    /// Root-mean-square residual of `ln Q`.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares slope, intercept and RMS residual of `y` on `x`.
fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (icpt + slope * a);
            r * r
        })
        .sum();
    (slope, icpt, (ss / n).sqrt())
}

pub fn fit_fc(sweep: &RemovalSweep) -> Result<CriticalFit> {
    fit_fc_with(sweep, &FitOptions::default())
}

/// Fits `ln Q = beta ln(f_c - f) + c` near the collapse of the LSCC, scanning
/// the sweep grid for the `f_c` with the smallest residual.
pub fn fit_fc_with(sweep: &RemovalSweep, opts: &FitOptions) -> Result<CriticalFit> {
    let pts = &sweep.points;
    let q0 = pts.first().map(|p| p.q).unwrap_or(0.0);
    if q0 <= 0.0 {
        return Err(Error::Fit("the intact graph has no strongly connected cluster".into()));
    }
    let collapse = pts
        .iter()
        .position(|p| p.q < opts.collapse_level)
        .ok_or_else(|| Error::Fit("Q never collapses along the sweep".into()))?;
    if collapse == 0 {
        return Err(Error::Fit("Q starts below the collapse level".into()));
    }
    let window: Vec<usize> = (0..collapse)
        .filter(|&i| {
            let r = pts[i].q / q0;
            r >= opts.window[0] && r <= opts.window[1] && pts[i].q > 0.0
        })
        .collect();
    if window.len() < opts.min_points {
        return Err(Error::Fit(format!(
            "{} points in the fit window, need {}",
            window.len(),
            opts.min_points
        )));
    }
    let last = *window.last().expect("non-empty window");
    let y: Vec<f64> = window.iter().map(|&i| pts[i].q.ln()).collect();
    let mut best: Option<CriticalFit> = None;
    for cand in &pts[last + 1..=collapse] {
        let f_c = cand.f;
        let x: Vec<f64> = window.iter().map(|&i| (f_c - pts[i].f).ln()).collect();
        let (slope, _, residual) = ols(&x, &y);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(CriticalFit {
                f_c,
                exponent: slope,
                fit_window: [pts[window[0]].f, pts[last].f],
                residual,
                points: window.len(),
            });
        }
    }
    best.ok_or_else(|| Error::Fit("no candidate critical point".into()))
}
