use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frames::{check_common, sample_cells, FrameSeries};
use crate::error::Result;
use crate::geometry::edt::{squared_distance_cells, squared_distance_to_complement_cells};
use crate::geometry::frontier::boundary_band;
use crate::geometry::{directed_hausdorff, hausdorff_distance, spacetime_frontier_distance, SpacetimeDistance};
use crate::grid::{l1_distance, Mask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceOptions {
    pub eta0: f64,
    /// Space-time weight; `None` makes one frame spacing count as one cell.
    pub time_weight: Option<f64>,
    /// Radius `r` of the space-time slack probe; `None` means four cells.
    pub slack_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeRow {
    pub time: f64,
    /// Before `eta0`; reported separately from the main table.
    pub early: bool,
    pub hausdorff: Option<f64>,
    /// `sup_{Omega_a} d(., Omega_b)`.
    pub a_from_b: Option<f64>,
    /// `sup_{Omega_b} d(., Omega_a)`.
    pub b_from_a: Option<f64>,
}

/// Slack probe at free-boundary points of `a`: distances to earlier supports of `b` and to the
/// complement of `b` one slack radius back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackProbe {
    pub radius: f64,
    pub frames_back_support: usize,
    pub frames_back_complement: usize,
    pub probes: usize,
    pub max_to_support: f64,
    pub max_to_complement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodPart {
    pub cells: usize,
    /// Largest distance from a good-part cell of the limit frontier to the finite-m frontier.
    pub max_distance: Option<f64>,
    pub caveat: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    /// Trapezoidal space-time L1 distance of the pressures.
    pub l1_pressure: f64,
    /// Initial support distance; `gamma_prime` when the pair involves the limit.
    pub initial_support_hausdorff: Option<f64>,
    pub initial_kind: String,
    pub per_time: Vec<TimeRow>,
    pub spacetime: Option<SpacetimeDistance>,
    /// Smallest k with `Omega_a(t) ⊆ dilate(Omega_b(t), k cells)` for all `t >= eta0`.
    pub containment_a_in_b: Option<usize>,
    pub containment_b_in_a: Option<usize>,
    pub slack: Option<SlackProbe>,
    pub good_part: Option<GoodPart>,
}

impl PairReport {
    pub fn at(&self, t: f64) -> Option<&TimeRow> {
        self.per_time.iter().find(|r| (r.time - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub labels: Vec<String>,
    pub eta0: f64,
    pub pairs: Vec<PairReport>,
}

impl ConvergenceTable {
    /// Order-insensitive lookup.
    pub fn pair(&self, a: &str, b: &str) -> Option<&PairReport> {
        self.pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

pub fn label(series: &FrameSeries) -> String {
    series.m().to_string()
}

fn cells_needed(d: f64, dx: f64) -> usize {
    (d / dx - 1e-9).ceil().max(0.0) as usize
}

fn time_rows(a: &FrameSeries, b: &FrameSeries, eta0: f64) -> Vec<TimeRow> {
    a.frames
        .par_iter()
        .zip(&b.frames)
        .map(|(fa, fb)| TimeRow {
            time: fa.time,
            early: fa.time < eta0 - 1e-12,
            hausdorff: hausdorff_distance(&fa.support, &fb.support).ok(),
            a_from_b: directed_hausdorff(&fa.support, &fb.support).ok(),
            b_from_a: directed_hausdorff(&fb.support, &fa.support).ok(),
        })
        .collect()
}

fn slack_probe(a: &FrameSeries, b: &FrameSeries, eta0: f64, radius: f64) -> Option<SlackProbe> {
    let g = a.grid().ok()?;
    let spacing = a.frame_spacing();
    if spacing <= 0.0 {
        return None;
    }
    let back_support = ((radius * radius / spacing) - 1e-9).ceil().max(0.0) as usize;
    let back_complement = ((radius / spacing) - 1e-9).ceil().max(0.0) as usize;
    let start = back_support.max(back_complement);
    let ds: Vec<Vec<f64>> = b.frames.par_iter().map(|f| squared_distance_cells(&f.support)).collect();
    let dc: Vec<Vec<f64>> = b.frames.par_iter().map(|f| squared_distance_to_complement_cells(&f.support)).collect();
    let (mut probes, mut to_s, mut to_c) = (0usize, 0.0f64, 0.0f64);
    for i in start..a.frames.len() {
        let f = &a.frames[i];
        if f.time < eta0 - 1e-12 {
            continue;
        }
        let band = boundary_band(&f.support).intersection(&f.support);
        for k in sample_cells(&band, 512) {
            probes += 1;
            let best = (0..=back_support).map(|s| ds[i - s][k]).fold(f64::INFINITY, f64::min);
            to_s = to_s.max(best.sqrt() * g.dx);
            to_c = to_c.max(dc[i - back_complement][k].sqrt() * g.dx);
        }
    }
    Some(SlackProbe {
        radius,
        frames_back_support: back_support,
        frames_back_complement: back_complement,
        probes,
        max_to_support: to_s,
        max_to_complement: to_c,
    })
}

/// Limit frontier cells whose radius-3 neighbourhood holds both positive and zero pressure cells
/// in each of the adjacent frames.
pub fn good_part_cells(limit: &FrameSeries, index: usize) -> Mask {
    let frame = &limit.frames[index];
    let g = frame.support.grid;
    let band = boundary_band(&frame.support);
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(limit.frames.len() - 1);
    let mut good = Mask::empty(g);
    let reach: i64 = 3;
    for k in band.cells() {
        let (ci, cj) = g.coords(k);
        let ok = (lo..=hi).all(|j| {
            let s = &limit.frames[j].support;
            let (mut pos, mut zero) = (false, false);
            let jr = if g.dim == 2 { reach } else { 0 };
            for dj in -jr..=jr {
                for di in -reach..=reach {
                    if di * di + dj * dj > reach * reach {
                        continue;
                    }
                    let (i, jj) = (ci as i64 + di, cj as i64 + dj);
                    if i < 0 || jj < 0 || i >= g.n as i64 || (g.dim == 2 && jj >= g.n as i64) {
                        zero = true;
                        continue;
                    }
                    if s.bits[g.index(i as usize, jj as usize)] {
                        pos = true;
                    } else {
                        zero = true;
                    }
                }
            }
            pos && zero
        });
        good.bits[k] = ok;
    }
    good
}

fn good_part(finite: &FrameSeries, limit: &FrameSeries, eta0: f64) -> GoodPart {
    let mut cells = 0;
    let mut worst: Option<f64> = None;
    for i in 0..limit.frames.len() {
        if limit.frames[i].time < eta0 - 1e-12 {
            continue;
        }
        let good = good_part_cells(limit, i);
        cells += good.count();
        let band = boundary_band(&finite.frames[i].support);
        if good.is_empty() || band.is_empty() {
            continue;
        }
        if let Ok(d) = directed_hausdorff(&good, &band) {
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    GoodPart {
        cells,
        max_distance: worst,
        caveat: "good part approximated by band cells with mixed radius-3 neighbourhoods in adjacent frames".into(),
    }
}

fn pair_report(a: &FrameSeries, b: &FrameSeries, opts: &ConvergenceOptions) -> Result<PairReport> {
    let g = a.grid()?;
    let n = a.frames.len();
    let l1: Vec<f64> = a.frames.iter().zip(&b.frames).map(|(x, y)| l1_distance(&x.p, &y.p)).collect::<Result<_>>()?;
    let mut l1_pressure = 0.0;
    for i in 1..n {
        l1_pressure += 0.5 * (l1[i] + l1[i - 1]) * (a.frames[i].time - a.frames[i - 1].time);
    }
    let per_time = time_rows(a, b, opts.eta0);
    let late: Vec<&TimeRow> = per_time.iter().filter(|r| !r.early).collect();
    let contain = |pick: fn(&TimeRow) -> Option<f64>| -> Option<usize> {
        let ds: Vec<f64> = late.iter().filter_map(|r| pick(r)).collect();
        if ds.is_empty() {
            None
        } else {
            Some(ds.iter().map(|d| cells_needed(*d, g.dx)).max().unwrap_or(0))
        }
    };
    let first = n - late.len();
    let fa: Vec<_> = a.frames[first..].iter().map(|f| f.frontier()).collect();
    let fb: Vec<_> = b.frames[first..].iter().map(|f| f.frontier()).collect();
    let spacetime = spacetime_frontier_distance(&fa, &fb, opts.time_weight).ok();
    let involves_limit = a.m().is_infinite() || b.m().is_infinite();
    let good = match (a.m().is_infinite(), b.m().is_infinite()) {
        (false, true) => Some(good_part(a, b, opts.eta0)),
        (true, false) => Some(good_part(b, a, opts.eta0)),
        _ => None,
    };
    Ok(PairReport {
        a: label(a),
        b: label(b),
        l1_pressure,
        initial_support_hausdorff: hausdorff_distance(&a.frames[0].support, &b.frames[0].support).ok(),
        initial_kind: if involves_limit { "gamma_prime" } else { "gamma" }.into(),
        containment_a_in_b: contain(|r| r.a_from_b),
        containment_b_in_a: contain(|r| r.b_from_a),
        per_time,
        spacetime,
        slack: slack_probe(a, b, opts.eta0, opts.slack_radius.unwrap_or(4.0 * g.dx)),
        good_part: good,
    })
}

/// Pairwise comparison of the m-sweep (ascending) and the optional limit run.
pub fn convergence_report(
    finite: &[FrameSeries],
    limit: Option<&FrameSeries>,
    opts: &ConvergenceOptions,
) -> Result<ConvergenceTable> {
    let mut all: Vec<&FrameSeries> = finite.iter().collect();
    if let Some(l) = limit {
        all.push(l);
    }
    check_common(&all)?;
    let idx: Vec<(usize, usize)> = (0..all.len()).flat_map(|i| (i + 1..all.len()).map(move |j| (i, j))).collect();
    let pairs = idx.par_iter().map(|&(i, j)| pair_report(all[i], all[j], opts)).collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable { labels: all.iter().map(|s| label(s)).collect(), eta0: opts.eta0, pairs })
}

/// Comparison of a single pair, e.g. a run against itself.
pub fn compare_pair(a: &FrameSeries, b: &FrameSeries, opts: &ConvergenceOptions) -> Result<PairReport> {
    check_common(&[a, b])?;
    pair_report(a, b, opts)
}
