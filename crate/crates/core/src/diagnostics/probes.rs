use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{power_law_fit, PowerFit};
use super::frames::FrameSeries;
use crate::error::{Error, Result};
use crate::geometry::{default_step, flow_point};
use crate::geometry::edt::{squared_distance_cells, squared_distance_to_complement_cells};
use crate::geometry::frontier::boundary_band;
use crate::grid::{Field, Grid};

/// Backward-streamline position of a probe relative to the previous frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dichotomy {
    pub lag: f64,
    pub distance_to_support: f64,
    pub distance_to_complement: f64,
    /// The backward point lies within one cell of the earlier boundary band.
    pub stays_on_boundary: bool,
    /// The backward point lies strictly outside the earlier support: the front moved.
    pub detached: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub cell: usize,
    pub x: [f64; 2],
    /// `None` where the ball leaves the grid.
    pub averages: Vec<Option<f64>>,
    pub fit: Option<PowerFit>,
    pub backward: Option<Dichotomy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeTable {
    pub time: f64,
    pub radii: Vec<f64>,
    pub rows: Vec<ProbeRow>,
    /// Mean over probes (with every radius inside the grid) of the ball averages.
    pub pooled_averages: Vec<f64>,
    pub pooled: Option<PowerFit>,
    /// `2 - 1/gamma` when an expansion exponent is supplied.
    pub floor_exponent: Option<f64>,
    pub skipped: usize,
}

/// Mean of `p` over cells whose centres lie in the closed ball `B(centre of cell, r)`.
pub fn ball_average(p: &Field, cell: usize, r: f64) -> Option<f64> {
    let g = p.grid;
    let rc = r / g.dx;
    if (g.edge_distance(cell) as f64) < rc.ceil() {
        return None;
    }
    let (ci, cj) = g.coords(cell);
    let reach = rc.floor() as i64;
    let r2 = rc * rc * (1.0 + 1e-12);
    let (mut sum, mut count) = (0.0, 0usize);
    let jr = if g.dim == 2 { reach } else { 0 };
    for dj in -jr..=jr {
        for di in -reach..=reach {
            if ((di * di + dj * dj) as f64) <= r2 {
                let k = g.index((ci as i64 + di) as usize, (cj as i64 + dj) as usize);
                sum += p.values[k];
                count += 1;
            }
        }
    }
    Some(sum / count as f64)
}

fn lookup(grid: Grid, values: &[f64], x: [f64; 2]) -> f64 {
    grid.locate(x).map(|k| values[k]).unwrap_or(f64::INFINITY)
}

/// Ball averages of the pressure at `points` on the frame at `time`, with the void/growth flags.
pub fn avg_pressure_probe(
    series: &FrameSeries,
    time: f64,
    points: &[usize],
    radii: &[f64],
    gamma: Option<f64>,
) -> Result<ProbeTable> {
    let idx = series.index_of(time).ok_or_else(|| Error::Insufficient(format!("no frame at t = {time}")))?;
    let frame = &series.frames[idx];
    let g = frame.p.grid;
    if let Some(r) = radii.iter().find(|r| **r < 2.0 * g.dx * (1.0 - 1e-12)) {
        return Err(Error::InvalidParameter(format!("probe radius {r} is below two cells")));
    }
    let previous = idx.checked_sub(1).map(|j| {
        let prev = &series.frames[j];
        let band = boundary_band(&prev.support);
        (
            frame.time - prev.time,
            squared_distance_cells(&prev.support),
            squared_distance_to_complement_cells(&prev.support),
            squared_distance_cells(&band),
        )
    });
    let h = default_step(&series.spec, g.dx);
    let rows: Vec<ProbeRow> = points
        .par_iter()
        .map(|&cell| {
            let averages: Vec<Option<f64>> = radii.iter().map(|&r| ball_average(&frame.p, cell, r)).collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                radii.iter().zip(&averages).filter_map(|(r, a)| a.map(|a| (*r, a))).unzip();
            let x = g.center(cell);
            let backward = previous.as_ref().and_then(|(lag, ds, dc, db)| {
                let y = flow_point(&series.spec, x, time, -lag, h)?;
                let d_s = lookup(g, ds, y).sqrt() * g.dx;
                let d_c = lookup(g, dc, y).sqrt() * g.dx;
                let d_b = lookup(g, db, y).sqrt() * g.dx;
                Some(Dichotomy {
                    lag: *lag,
                    distance_to_support: d_s,
                    distance_to_complement: d_c,
                    stays_on_boundary: d_b <= g.dx * (1.0 + 1e-9),
                    detached: d_s > 0.0,
                })
            });
            ProbeRow { cell, x, averages, fit: power_law_fit(&xs, &ys), backward }
        })
        .collect();
    let complete: Vec<&ProbeRow> = rows.iter().filter(|r| r.averages.iter().all(Option::is_some)).collect();
    let skipped = rows.len() - complete.len();
    let pooled_averages: Vec<f64> = if complete.is_empty() {
        Vec::new()
    } else {
        (0..radii.len())
            .map(|i| complete.iter().map(|r| r.averages[i].unwrap_or(0.0)).sum::<f64>() / complete.len() as f64)
            .collect()
    };
    let pooled = if pooled_averages.is_empty() { None } else { power_law_fit(radii, &pooled_averages) };
    Ok(ProbeTable {
        time,
        radii: radii.to_vec(),
        rows,
        pooled_averages,
        pooled,
        floor_exponent: gamma.map(|g| 2.0 - 1.0 / g),
        skipped,
    })
}
