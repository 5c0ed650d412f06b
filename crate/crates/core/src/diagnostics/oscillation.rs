use serde::{Deserialize, Serialize};

use super::fit::{power_law_fit, PowerFit};
use super::frames::FrameSeries;
use crate::error::{Error, Result};
use crate::geometry::{inf_convolve, sup_convolve};
use crate::grid::Field;

/// `∫ (sup_{B(x,r)} rho - inf_{B(x,r)} rho) dx`.
pub fn oscillation_integral(rho: &Field, r: f64) -> f64 {
    let hi = sup_convolve(rho, r);
    let lo = inf_convolve(rho, r);
    hi.values.iter().zip(&lo.values).map(|(a, b)| a - b).sum::<f64>() * rho.grid.cell_volume()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub time: f64,
    pub osc: Vec<f64>,
    /// Exponent of `osc(t, r) ~ r^sigma`.
    pub fit: Option<PowerFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub radii: Vec<f64>,
    pub rows: Vec<OscillationRow>,
    /// Smallest `C >= 1` with `osc(t, r) <= C (r + osc(0, C r))` across all rows and radii.
    pub c: Option<f64>,
    pub c_limit: f64,
    pub pass: bool,
}

pub const PROPAGATION_LIMIT: f64 = 20.0;

/// Oscillation integrals of the density at every frame and the single propagation constant.
pub fn oscillation_propagation(series: &FrameSeries, radii: &[f64]) -> Result<OscillationReport> {
    let first = series.frames.first().ok_or_else(|| Error::Insufficient("no frames".into()))?;
    let g = first.rho.grid;
    if let Some(r) = radii.iter().find(|r| **r < g.dx * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!("oscillation radius {r} is below one cell")));
    }
    let rows: Vec<OscillationRow> = series
        .frames
        .iter()
        .map(|f| {
            let osc: Vec<f64> = radii.iter().map(|&r| oscillation_integral(&f.rho, r)).collect();
            OscillationRow { time: f.time, fit: power_law_fit(radii, &osc), osc }
        })
        .collect();
    let cap = 2.0 * g.extent() * (g.dim as f64).sqrt();
    let osc0 = |r: f64| oscillation_integral(&first.rho, r.min(cap));
    let excess = |c: f64| -> f64 {
        let base: Vec<f64> = radii.iter().map(|&r| c * (r + osc0(c * r))).collect();
        rows.iter().flat_map(|row| row.osc.iter().zip(&base).map(|(o, b)| o - b)).fold(f64::NEG_INFINITY, f64::max)
    };
    let tol = 1e-12;
    let c = if excess(1.0) <= tol {
        Some(1.0)
    } else {
        let mut hi = 2.0;
        while excess(hi) > tol && hi < 1e3 {
            hi *= 2.0;
        }
        if excess(hi) > tol {
            None
        } else {
            let mut lo = hi / 2.0;
            for _ in 0..30 {
                let mid = 0.5 * (lo + hi);
                if excess(mid) <= tol {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        }
    };
    Ok(OscillationReport {
        radii: radii.to_vec(),
        rows,
        c,
        c_limit: PROPAGATION_LIMIT,
        pass: c.is_some_and(|c| c <= PROPAGATION_LIMIT),
    })
}
