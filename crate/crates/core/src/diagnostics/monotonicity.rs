use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frames::{sample_cells, FrameSeries};
use crate::error::Result;
use crate::geometry::{default_step, dilate, flow_map_set, flow_point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamlineReport {
    pub pairs: usize,
    /// `(t, t + s)` pairs where the pushed support leaves the 2-cell dilation of the later one.
    pub containment_failures: Vec<(f64, f64)>,
    pub probes: usize,
    pub decay_passes: usize,
    pub decay_fraction: f64,
    pub c0: f64,
    pub pass: bool,
}

pub const DECAY_PASS_FRACTION: f64 = 0.95;

/// Support monotonicity along `-b` streamlines and the pointwise decay bound
/// `p(X(s), t0 + s) >= exp(-(C0 + 1/t0) s) p(x0, t0) - 10 dx`.
pub fn streamline_check(series: &FrameSeries, c0: f64, t0_min: f64, max_probes: usize) -> Result<StreamlineReport> {
    let g = series.grid()?;
    let n = series.frames.len();
    let spec = &series.spec;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dilated: Vec<_> = series.frames.par_iter().map(|f| dilate(&f.support, 2.0 * g.dx)).collect();
    let containment_failures: Vec<(f64, f64)> = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let (a, b) = (&series.frames[i], &series.frames[j]);
            let pushed = flow_map_set(&a.support, a.time, b.time - a.time, spec);
            (!pushed.is_subset_of(&dilated[j])).then_some((a.time, b.time))
        })
        .collect();

    let h = default_step(spec, g.dx);
    let starts: Vec<usize> = (0..n).filter(|&i| series.frames[i].time >= t0_min - 1e-12 && i + 1 < n).collect();
    let per_frame = (max_probes / starts.len().max(1)).max(1);
    let tol = 10.0 * g.dx;
    let outcomes: Vec<bool> = starts
        .par_iter()
        .flat_map_iter(|&i| {
            let f = &series.frames[i];
            let cells = sample_cells(&f.support, per_frame);
            let mut out = Vec::new();
            for k in cells {
                let p0 = f.p.values[k];
                let rate = c0 + 1.0 / f.time;
                for later in &series.frames[i + 1..] {
                    let s = later.time - f.time;
                    let Some(y) = flow_point(spec, g.center(k), f.time, s, h) else { continue };
                    let Some(cell) = g.locate(y) else { continue };
                    out.push(later.p.values[cell] >= (-rate * s).exp() * p0 - tol);
                }
            }
            out
        })
        .collect();
    let decay_passes = outcomes.iter().filter(|b| **b).count();
    let decay_fraction = if outcomes.is_empty() { 1.0 } else { decay_passes as f64 / outcomes.len() as f64 };
    Ok(StreamlineReport {
        pairs: pairs.len(),
        pass: containment_failures.is_empty() && decay_fraction >= DECAY_PASS_FRACTION,
        containment_failures,
        probes: outcomes.len(),
        decay_passes,
        decay_fraction,
        c0,
    })
}
