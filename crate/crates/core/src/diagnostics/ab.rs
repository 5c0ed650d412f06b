use serde::{Deserialize, Serialize};

use super::frames::FrameSeries;
use crate::error::Result;
use crate::geometry::erode;
use crate::grid::{laplacian, linf_norm, Field};
use crate::model::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbRow {
    pub time: f64,
    /// `None` when the eroded support is empty.
    pub min_q: Option<f64>,
    pub floor: f64,
    pub margin: Option<f64>,
    pub tolerance: f64,
    pub interior_cells: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbReport {
    pub m: f64,
    pub c0: f64,
    pub eta0: f64,
    /// Floor `-C0/(m-1)` without the `1/t` term.
    pub improved: bool,
    pub rows: Vec<AbRow>,
    pub pass: bool,
}

/// `Delta_h p + div b + f(x, t, p)` on every cell.
pub fn ab_quantity(p: &Field, spec: &ModelSpec) -> Field {
    let g = p.grid;
    let lap = laplacian(p);
    let t = p.time;
    let values = (0..g.len())
        .map(|k| {
            let x = g.center(k);
            lap.values[k] + spec.drift.div(x, t, g.dim) + spec.source.value(x, t, p.values[k])
        })
        .collect();
    Field { grid: g, values, time: t }
}

pub fn ab_tolerance(dx: f64, p_inf: f64) -> f64 {
    (0.1f64).max(10.0 * dx) * (1.0 + p_inf)
}

/// Minimum of the AB quantity over the support eroded by two cells, against `-(C0 + 1/t)/(m-1)`.
pub fn ab_check(series: &FrameSeries, eta0: f64, c0: f64, improved: bool) -> Result<AbReport> {
    let m = series.m().finite()?;
    let g = series.grid()?;
    let mut rows = Vec::new();
    for frame in &series.frames {
        let t = frame.time;
        if t < eta0 - 1e-12 || (!improved && t <= 0.0) {
            continue;
        }
        let floor = if improved { -c0 / (m - 1.0) } else { -(c0 + 1.0 / t) / (m - 1.0) };
        let interior = erode(&frame.support, 2.0 * g.dx);
        let mut p = frame.p.clone();
        p.time = t;
        let q = ab_quantity(&p, &series.spec);
        let min_q = interior.cells().map(|k| q.values[k]).reduce(f64::min);
        let tolerance = ab_tolerance(g.dx, linf_norm(&frame.p));
        let margin = min_q.map(|v| v - floor);
        rows.push(AbRow {
            time: t,
            min_q,
            floor,
            margin,
            tolerance,
            interior_cells: interior.count(),
            pass: margin.is_none_or(|mg| mg >= -tolerance),
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(AbReport { m, c0, eta0, improved, rows, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::{Domain, Drift, Exponent, InitialData, Source};

    #[test]
    fn paraboloid_quantity_is_exact() {
        let g = Grid::new(2, 64, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
        let a = 2.0;
        let p = Field::from_fn(g, 0.0, |x| a * (0.5 - x[0] * x[0] - x[1] * x[1]).max(0.0));
        let spec = ModelSpec {
            m: Exponent::Finite(2.0),
            drift: Drift::None,
            source: Source::Constant { value: 0.7 },
            horizon: 1.0,
            domain: Domain { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] },
            init: InitialData::AnnulusPlusCore,
        };
        let q = ab_quantity(&p, &spec);
        let inner = erode(&p.support(0.0), 2.0 * g.dx);
        for k in inner.cells() {
            assert!((q.values[k] - (-2.0 * 2.0 * a + 0.7)).abs() < 1e-9);
        }
    }
}
