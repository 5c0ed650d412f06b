use serde::{Deserialize, Serialize};

use super::fit::{power_law_fit, PowerFit};
use crate::error::{Error, Result};
use crate::geometry::FrontierRecord;
use crate::grid::{Mask, MIN_CELLS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionBoundInputs {
    pub d: f64,
    pub sigma_m: f64,
    pub mu: f64,
    pub m: f64,
}

impl DimensionBoundInputs {
    /// `d - sigma_m + mu/(m-1)`.
    pub fn bound(&self) -> f64 {
        self.d - self.sigma_m + self.mu / (self.m - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
    pub monotone: bool,
    /// Slope of `log count` against `log(1/R)`.
    pub fit: Option<PowerFit>,
    pub dimension: Option<f64>,
    pub bound: Option<f64>,
}

/// Greedy packing of disjoint radius-`r` balls centred on set cells, scanned in raster order.
/// Every set cell lies within `2r` of a chosen centre, so the tripled balls cover.
pub fn packing_count(set: &Mask, r: f64) -> usize {
    let g = set.grid;
    let reach = (2.0 * r / g.dx).ceil() as i64;
    let lim = (2.0 * r / g.dx).powi(2) * (1.0 - 1e-12);
    let mut excluded = vec![false; g.len()];
    let mut count = 0;
    for k in set.cells() {
        if excluded[k] {
            continue;
        }
        count += 1;
        let (ci, cj) = g.coords(k);
        let jr = if g.dim == 2 { reach } else { 0 };
        for dj in -jr..=jr {
            let j = cj as i64 + dj;
            if j < 0 || (g.dim == 2 && j >= g.n as i64) {
                continue;
            }
            for di in -reach..=reach {
                let i = ci as i64 + di;
                if i < 0 || i >= g.n as i64 || ((di * di + dj * dj) as f64) >= lim {
                    continue;
                }
                excluded[g.index(i as usize, j as usize)] = true;
            }
        }
    }
    count
}

pub fn packing_counts(set: &Mask, radii: &[f64]) -> Vec<usize> {
    radii.iter().map(|&r| packing_count(set, r)).collect()
}

fn support_diameter(mask: &Mask) -> f64 {
    let g = mask.grid;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for k in mask.cells() {
        let x = g.center(k);
        for a in 0..g.dim {
            lo[a] = lo[a].min(x[a]);
            hi[a] = hi[a].max(x[a]);
        }
    }
    (0..g.dim).map(|a| hi[a] - lo[a] + g.dx).fold(0.0, f64::max)
}

/// Geometric ladder of `count` radii from three cells to a quarter of the support diameter.
pub fn auto_radii(frontier: &FrontierRecord, count: usize) -> Vec<f64> {
    let dx = frontier.support.grid.dx;
    let hi = 0.25 * support_diameter(&frontier.support);
    super::fit::geometric_ladder(3.0 * dx, hi.max(3.0 * dx), count)
}

/// Packing counts of the frontier band across `radii` and the implied box dimension.
pub fn covering_dimension(
    frontier: &FrontierRecord,
    radii: &[f64],
    bound: Option<DimensionBoundInputs>,
) -> Result<DimensionEstimate> {
    let g = frontier.boundary.grid;
    let cells = frontier.boundary.count();
    if cells < MIN_CELLS {
        return Err(Error::FrontierTooSmall { cells, min: MIN_CELLS });
    }
    if radii.len() < 4 {
        return Err(Error::InvalidParameter(format!("{} radii; need at least 4", radii.len())));
    }
    let diam = support_diameter(&frontier.support);
    for &r in radii {
        if r < 3.0 * g.dx * (1.0 - 1e-12) || r > 0.25 * diam * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "radius {r} outside [3dx, diameter/4] = [{}, {}]",
                3.0 * g.dx,
                0.25 * diam
            )));
        }
    }
    let counts = packing_counts(&frontier.boundary, radii);
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let monotone = order.windows(2).all(|w| counts[w[1]] <= counts[w[0]]);
    let inv: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let fit = power_law_fit(&inv, &ys);
    Ok(DimensionEstimate {
        radii: radii.to_vec(),
        counts,
        monotone,
        dimension: fit.map(|f| f.slope),
        fit,
        bound: bound.map(|b| b.bound()),
    })
}
