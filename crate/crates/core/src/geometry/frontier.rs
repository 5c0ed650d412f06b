//! Supports, free-boundary bands, Hausdorff distances and the time-dilated
//! sup/inf-convolutions of a trajectory.

use serde::{Deserialize, Serialize};

use super::edt::{squared_distance_cells, squared_distance_to_complement_cells};
use super::morphology::{inf_convolve, sup_convolve};
use crate::error::{Error, Result};
use crate::grid::{linf_norm, Field, Mask};

#[derive(Clone, Debug, PartialEq)]
pub struct FrontierRecord {
    pub time: f64,
    pub support: Mask,
    /// Support cells with an outside face neighbour, plus outside cells with a support neighbour.
    pub boundary: Mask,
    pub dist_to_support: Field,
    pub dist_to_complement: Field,
}

/// `max(1e-10, 1e-6 |p|_inf)`.
pub fn default_threshold(p: &Field) -> f64 {
    (1e-6 * linf_norm(p)).max(1e-10)
}

pub fn boundary_band(support: &Mask) -> Mask {
    let g = support.grid;
    let mut band = Mask::empty(g);
    for k in 0..g.len() {
        let inside = support.bits[k];
        let mut neighbours = 0;
        let mut differs = false;
        for nb in g.neighbors(k) {
            neighbours += 1;
            if support.bits[nb] != inside {
                differs = true;
            }
        }
        // Cells at the grid edge see an outside (zero) ghost neighbour.
        if inside && neighbours < 2 * g.dim {
            differs = true;
        }
        band.bits[k] = differs;
    }
    band
}

fn scaled_distance(d2: Vec<f64>, dx: f64, template: &Field) -> Field {
    Field { grid: template.grid, values: d2.into_iter().map(|v| v.sqrt() * dx).collect(), time: template.time }
}

/// Support `{p > threshold}` with its boundary band and distance transforms.
pub fn extract_frontier(p: &Field, threshold: Option<f64>) -> FrontierRecord {
    let thr = threshold.unwrap_or_else(|| default_threshold(p)).max(0.0);
    let support = p.support(thr);
    frontier_from_support(support, p.time)
}

pub fn frontier_from_support(support: Mask, time: f64) -> FrontierRecord {
    let g = support.grid;
    let template = Field::zeros(g, time);
    let boundary = boundary_band(&support);
    let dist_to_support = scaled_distance(squared_distance_cells(&support), g.dx, &template);
    let dist_to_complement = scaled_distance(squared_distance_to_complement_cells(&support), g.dx, &template);
    FrontierRecord { time, support, boundary, dist_to_support, dist_to_complement }
}

/// `sup_{x in a} d(x, b)` for cell-centre geometry.
pub fn directed_hausdorff(a: &Mask, b: &Mask) -> Result<f64> {
    a.grid.check_same(&b.grid)?;
    if a.is_empty() {
        return Err(Error::EmptySet("first set"));
    }
    if b.is_empty() {
        return Err(Error::EmptySet("second set"));
    }
    let d = squared_distance_cells(b);
    let worst = a.cells().map(|k| d[k]).fold(0.0, f64::max);
    Ok(worst.sqrt() * a.grid.dx)
}

pub fn hausdorff_distance(a: &Mask, b: &Mask) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeDistance {
    pub distance: f64,
    pub time_weight: f64,
    /// Frames skipped because one of the frontiers was empty.
    pub skipped_times: Vec<f64>,
}

/// Default weight: one frame spacing counts as one cell.
pub fn default_time_weight(records: &[FrontierRecord]) -> f64 {
    let dx = records.first().map(|r| r.support.grid.dx).unwrap_or(1.0);
    let gaps: Vec<f64> = records.windows(2).map(|w| w[1].time - w[0].time).filter(|g| *g > 0.0).collect();
    if gaps.is_empty() {
        return 1.0;
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    dx / mean
}

/// Hausdorff distance between the clouds `{(x, w t) : x in boundary(t)}`.
pub fn spacetime_frontier_distance(
    a: &[FrontierRecord],
    b: &[FrontierRecord],
    time_weight: Option<f64>,
) -> Result<SpacetimeDistance> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Insufficient("frontier lists must share a non-empty time sample".into()));
    }
    for (ra, rb) in a.iter().zip(b) {
        ra.support.grid.check_same(&rb.support.grid)?;
        if (ra.time - rb.time).abs() > 1e-9 * (1.0 + ra.time.abs()) {
            return Err(Error::GridMismatch(format!("frame times {} vs {}", ra.time, rb.time)));
        }
    }
    let w = time_weight.unwrap_or_else(|| default_time_weight(a));
    let mut skipped = Vec::new();
    let keep: Vec<usize> = (0..a.len())
        .filter(|&i| {
            let ok = !a[i].boundary.is_empty() && !b[i].boundary.is_empty();
            if !ok {
                skipped.push(a[i].time);
            }
            ok
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptySet("every frame has an empty frontier"));
    }
    let dx = a[0].support.grid.dx;
    let dist_a: Vec<Vec<f64>> = keep.iter().map(|&i| squared_distance_cells(&a[i].boundary)).collect();
    let dist_b: Vec<Vec<f64>> = keep.iter().map(|&i| squared_distance_cells(&b[i].boundary)).collect();
    let directed = |from: &[FrontierRecord], to: &[Vec<f64>]| -> f64 {
        let mut worst: f64 = 0.0;
        for &i in &keep {
            for k in from[i].boundary.cells() {
                let mut best = f64::INFINITY;
                for (jj, &j) in keep.iter().enumerate() {
                    let dt = w * (from[i].time - from[j].time);
                    let s = (to[jj][k] * dx * dx + dt * dt).sqrt();
                    best = best.min(s);
                }
                worst = worst.max(best);
            }
        }
        worst
    };
    let d = directed(a, &dist_b).max(directed(b, &dist_a));
    Ok(SpacetimeDistance { distance: d, time_weight: w, skipped_times: skipped })
}

/// Boundary cells as CSV rows `x[,y],t`.
pub fn frontier_csv(records: &[FrontierRecord]) -> String {
    let mut out = String::new();
    let dim = records.first().map(|r| r.support.grid.dim).unwrap_or(1);
    out.push_str(if dim == 2 { "x,y,t\n" } else { "x,t\n" });
    for r in records {
        let g = r.support.grid;
        for k in r.boundary.cells() {
            let x = g.center(k);
            if dim == 2 {
                out.push_str(&format!("{},{},{}\n", x[0], x[1], r.time));
            } else {
                out.push_str(&format!("{},{}\n", x[0], r.time));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionParams {
    pub r0: f64,
    /// Radius decay rate `L` in `r(t) = r0 exp(-L t)`.
    pub l: f64,
    pub alpha: f64,
    pub tau0: f64,
}

impl ConvolutionParams {
    pub fn radius(&self, t: f64) -> f64 {
        self.r0 * (-self.l * t).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 >= 0.0 && self.alpha >= 0.0 && self.alpha < 0.5 && self.tau0 >= 0.0 && self.l >= 0.0) {
            return Err(Error::InvalidParameter(format!("convolution parameters {self:?}")));
        }
        Ok(())
    }
}

/// Linear interpolation in time between saved densities.
pub fn interpolate(frames: &[(f64, &Field)], t: f64) -> Result<Field> {
    let last = frames.last().ok_or_else(|| Error::Insufficient("no frames".into()))?;
    if t > last.0 + 1e-12 * (1.0 + last.0.abs()) {
        return Err(Error::HorizonShortfall { needed: t, available: last.0 });
    }
    let pos = frames.iter().position(|(s, _)| *s >= t - 1e-12 * (1.0 + t.abs())).unwrap_or(frames.len() - 1);
    if pos == 0 || (frames[pos].0 - t).abs() <= 1e-12 * (1.0 + t.abs()) {
        let mut f = frames[pos].1.clone();
        f.time = t;
        return Ok(f);
    }
    let (t0, f0) = frames[pos - 1];
    let (t1, f1) = frames[pos];
    let th = (t - t0) / (t1 - t0);
    let values = f0.values.iter().zip(&f1.values).map(|(a, b)| (1.0 - th) * a + th * b).collect();
    Ok(Field { grid: f0.grid, values, time: t })
}

/// `u1 = (1-a)^(1/(m-1)) sup_B rho((1-a)t)` and `u2 = (1+a)^(1/(m-1)) inf_B rho((1+a)t)` at `times`.
pub fn modified_convolutions(
    frames: &[(f64, &Field)],
    m: f64,
    params: &ConvolutionParams,
    times: &[f64],
) -> Result<(Vec<Field>, Vec<Field>)> {
    params.validate()?;
    let available = frames.last().map(|f| f.0).unwrap_or(0.0);
    let needed = (1.0 + params.alpha) * params.tau0;
    if needed > available + 1e-12 * (1.0 + available) {
        return Err(Error::HorizonShortfall { needed, available });
    }
    let e = 1.0 / (m - 1.0);
    let lo = (1.0 - params.alpha).powf(e);
    let hi = (1.0 + params.alpha).powf(e);
    let mut u1 = Vec::with_capacity(times.len());
    let mut u2 = Vec::with_capacity(times.len());
    for &t in times {
        let r = params.radius(t);
        let a = interpolate(frames, (1.0 - params.alpha) * t)?;
        let b = interpolate(frames, (1.0 + params.alpha) * t)?;
        let mut s = sup_convolve(&a, r).map(|v| lo * v);
        let mut i = inf_convolve(&b, r).map(|v| hi * v);
        s.time = t;
        i.time = t;
        u1.push(s);
        u2.push(i);
    }
    Ok((u1, u2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn disk(g: Grid, c: [f64; 2], r: f64) -> Mask {
        Mask::from_fn(g, |x| (x[0] - c[0]).hypot(x[1] - c[1]) < r)
    }

    #[test]
    fn hausdorff_examples() {
        let g = Grid::new(2, 128, &[-3.0, -3.0], &[3.0, 3.0]).unwrap();
        let a = disk(g, [0.0, 0.0], 1.0);
        assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        let b = disk(g, [0.5, 0.0], 1.0);
        assert!((hausdorff_distance(&a, &b).unwrap() - 0.5).abs() <= g.dx);
        let c = disk(g, [0.0, 0.0], 2.0);
        assert!((hausdorff_distance(&a, &c).unwrap() - 1.0).abs() <= g.dx);
        match hausdorff_distance(&Mask::empty(g), &a) {
            Err(Error::EmptySet(which)) => assert_eq!(which, "first set"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(hausdorff_distance(&a, &Mask::empty(g)), Err(Error::EmptySet("second set"))));
    }

    #[test]
    fn empty_support_record() {
        let g = Grid::new(2, 16, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let rec = extract_frontier(&Field::zeros(g, 0.0), None);
        assert!(rec.support.is_empty() && rec.boundary.is_empty());
        assert!(rec.dist_to_support.values.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn band_width_and_containment() {
        let g = Grid::new(2, 64, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let p = Field::from_fn(g, 0.0, |x| (0.5 - x[0].hypot(x[1])).max(0.0));
        let rec = extract_frontier(&p, None);
        let outer = crate::geometry::dilate(&rec.support, g.dx);
        let inner = crate::geometry::erode(&rec.support, g.dx);
        assert!(rec.boundary.is_subset_of(&outer.difference(&inner)));
        for k in rec.support.cells() {
            assert_eq!(rec.dist_to_support.values[k], 0.0);
        }
        for k in rec.support.complement().cells() {
            assert_eq!(rec.dist_to_complement.values[k], 0.0);
        }
    }

    #[test]
    fn degenerate_convolutions_reproduce_density() {
        let g = Grid::new(2, 32, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let f0 = Field::from_fn(g, 0.0, |x| (0.5 - x[0].hypot(x[1])).max(0.0));
        let f1 = Field::from_fn(g, 1.0, |x| (0.6 - x[0].hypot(x[1])).max(0.0));
        let frames = [(0.0, &f0), (1.0, &f1)];
        let params = ConvolutionParams { r0: 0.0, l: 1.0, alpha: 0.0, tau0: 1.0 };
        let (u1, u2) = modified_convolutions(&frames, 3.0, &params, &[0.0, 0.5, 1.0]).unwrap();
        let mid = interpolate(&frames, 0.5).unwrap();
        assert_eq!(u1[1].values, mid.values);
        assert_eq!(u2[1].values, mid.values);
        assert_eq!(u1[2].values, f1.values);
        let bad = ConvolutionParams { r0: 0.1, l: 1.0, alpha: 0.2, tau0: 1.0 };
        assert!(matches!(modified_convolutions(&frames, 3.0, &bad, &[0.0]), Err(Error::HorizonShortfall { .. })));
    }
}
