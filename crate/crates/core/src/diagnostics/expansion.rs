use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{power_law_fit, PowerFit};
use super::frames::{sample_cells, FrameSeries};
use crate::error::{Error, Result};
use crate::geometry::edt::{squared_distance_cells, squared_distance_to_complement_cells};
use crate::geometry::frontier::boundary_band;
use crate::geometry::{default_step, directed_hausdorff, flow_map_cells, flow_map_set, flow_point};

pub const MAX_PROBES: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub s: f64,
    pub samples: usize,
    /// Smallest `d(X(x0, t0; -s), Omega(t0 - s))` over probes.
    pub min_distance: f64,
    pub mean_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardCapRow {
    pub s: f64,
    /// Largest `sup_{Omega(t+s)} d(., X(Omega(t), s))` over frames `t >= eta0`.
    pub growth: f64,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub eta0: f64,
    pub probes: usize,
    pub rows: Vec<ExpansionRow>,
    /// Fit of `min_distance ~ C_* s^gamma` over rows with distance above one cell.
    pub fit: Option<PowerFit>,
    pub c_star: Option<f64>,
    pub gamma: Option<f64>,
    pub forward: Vec<ForwardCapRow>,
    /// `max growth / sqrt(s)`.
    pub forward_c: f64,
}

fn frames_back(spacing: f64, s: f64) -> usize {
    ((s / spacing) - 1e-9).ceil().max(1.0) as usize
}

/// Backward distances from free-boundary probes to earlier supports and the forward speed cap.
pub fn strict_expansion_measure(series: &FrameSeries, eta0: f64, s_ladder: &[f64]) -> Result<ExpansionReport> {
    let n = series.frames.len();
    if n < 3 {
        return Err(Error::Insufficient(format!("{n} snapshots; need at least 3")));
    }
    let first_gap = series.frames[1].time - series.frames[0].time;
    if eta0 < 2.0 * first_gap * (1.0 - 1e-9) {
        return Err(Error::Insufficient(format!("eta0 = {eta0} is below two snapshot spacings ({first_gap})")));
    }
    let spacing = series.frame_spacing();
    let g = series.grid()?;
    let h = default_step(&series.spec, g.dx);
    let dist: Vec<Vec<f64>> = series.frames.par_iter().map(|f| squared_distance_cells(&f.support)).collect();
    let late: Vec<usize> = (0..n).filter(|&i| series.frames[i].time >= eta0 - 1e-12).collect();
    let probes: Vec<(usize, usize)> = late
        .iter()
        .flat_map(|&i| {
            let band = boundary_band(&series.frames[i].support).intersection(&series.frames[i].support);
            let per_frame = (MAX_PROBES / late.len().max(1)).max(1);
            sample_cells(&band, per_frame).into_iter().map(move |k| (i, k))
        })
        .collect();

    let mut rows = Vec::new();
    for &s in s_ladder {
        let back = frames_back(spacing, s);
        let ds: Vec<f64> = probes
            .par_iter()
            .filter(|(i, _)| *i >= back)
            .filter_map(|&(i, k)| {
                let f = &series.frames[i];
                let j = i - back;
                let lag = f.time - series.frames[j].time;
                let y = flow_point(&series.spec, g.center(k), f.time, -lag, h)?;
                let cell = g.locate(y)?;
                Some(dist[j][cell].sqrt() * g.dx)
            })
            .collect();
        if ds.is_empty() {
            continue;
        }
        let lag = back as f64 * spacing;
        rows.push(ExpansionRow {
            s: lag,
            samples: ds.len(),
            min_distance: ds.iter().cloned().fold(f64::INFINITY, f64::min),
            mean_distance: ds.iter().sum::<f64>() / ds.len() as f64,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.min_distance > g.dx).map(|r| (r.s, r.min_distance)).unzip();
    let fit = power_law_fit(&xs, &ys);

    let mut forward = Vec::new();
    for &s in s_ladder {
        let back = frames_back(spacing, s);
        let growth = late
            .par_iter()
            .filter(|&&i| i + back < n)
            .map(|&i| {
                let a = &series.frames[i];
                let b = &series.frames[i + back];
                if a.support.is_empty() || b.support.is_empty() {
                    return 0.0;
                }
                let pushed = flow_map_set(&a.support, a.time, b.time - a.time, &series.spec);
                directed_hausdorff(&b.support, &pushed).unwrap_or(0.0)
            })
            .reduce(|| 0.0, f64::max);
        let lag = back as f64 * spacing;
        if late.iter().any(|&i| i + back < n) {
            forward.push(ForwardCapRow { s: lag, growth, c: growth / lag.sqrt() });
        }
    }
    let forward_c = forward.iter().map(|r| r.c).fold(0.0, f64::max);
    Ok(ExpansionReport {
        eta0,
        probes: probes.len(),
        rows,
        c_star: fit.map(|f| f.prefactor),
        gamma: fit.map(|f| f.slope),
        fit,
        forward,
        forward_c,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartExpansionRow {
    pub tau: f64,
    /// Largest `r` with `X(Omega(0), tau) + B_r` inside `Omega(tau)`.
    pub r_tau: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Checks `X(Omega(0), tau) + B(r_tau) ⊆ Omega(tau)` with `r_tau >= 0.25 tau^(2/varsigma0)`.
pub fn start_expansion_check(series: &FrameSeries, varsigma0: f64, taus: &[f64]) -> Result<Vec<StartExpansionRow>> {
    let start = series.frames.first().ok_or_else(|| Error::Insufficient("no frames".into()))?;
    let g = start.support.grid;
    let mut out = Vec::new();
    for &tau in taus {
        let frame = series.at(tau)?;
        let pushed = flow_map_cells(&start.support, start.time, tau - start.time, &series.spec);
        let dc = squared_distance_to_complement_cells(&frame.support);
        let r_tau = pushed.cells().map(|k| dc[k].sqrt() * g.dx).fold(f64::INFINITY, f64::min);
        let r_tau = if r_tau.is_finite() { r_tau } else { 0.0 };
        let bound = 0.25 * tau.powf(2.0 / varsigma0);
        out.push(StartExpansionRow { tau, r_tau, bound, pass: r_tau >= bound });
    }
    Ok(out)
}
