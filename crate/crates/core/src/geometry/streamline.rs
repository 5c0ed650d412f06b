//! Characteristics `dX/ds = -b(X, t0 + s)` and the induced push-forward of masks.

use serde::{Deserialize, Serialize};

use super::morphology::dilate;
use crate::grid::Mask;
use crate::model::ModelSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamlineTrace {
    pub x0: [f64; 2],
    pub t0: f64,
    /// `(s, X(x0, t0; s))`, sorted by `s`.
    pub samples: Vec<(f64, [f64; 2])>,
    /// Set when the path left the doubled domain box and was truncated.
    pub exited: bool,
}

impl StreamlineTrace {
    pub fn at(&self, s: f64) -> Option<[f64; 2]> {
        self.samples.iter().find(|(si, _)| (si - s).abs() <= 1e-12 * (1.0 + s.abs())).map(|(_, x)| *x)
    }
}

fn rk4(spec: &ModelSpec, x: [f64; 2], t: f64, h: f64) -> [f64; 2] {
    let vel = |x: [f64; 2], t: f64| {
        let b = spec.drift.value(x, t);
        [-b[0], -b[1]]
    };
    let k1 = vel(x, t);
    let k2 = vel([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]], t + 0.5 * h);
    let k3 = vel([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]], t + 0.5 * h);
    let k4 = vel([x[0] + h * k3[0], x[1] + h * k3[1]], t + h);
    [
        x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Default step: half of `min(dx / |b|_inf, 0.01 T)`.
pub fn default_step(spec: &ModelSpec, dx: f64) -> f64 {
    let b = spec.drift_bound(0.0);
    let h = if b > 0.0 { (dx / b).min(0.01 * spec.horizon) } else { 0.01 * spec.horizon };
    0.5 * h
}

fn inside_box(spec: &ModelSpec, x: [f64; 2]) -> bool {
    let d = spec.dim();
    (0..d).all(|a| {
        let lo = spec.domain.lo[a];
        let hi = spec.domain.hi[a];
        let c = 0.5 * (lo + hi);
        let half = hi - lo;
        (x[a] - c).abs() <= half
    })
}

/// Integrates from `s = 0` to `s`, landing exactly on `s`. `None` if the path leaves the doubled box.
pub fn flow_point(spec: &ModelSpec, x0: [f64; 2], t0: f64, s: f64, h: f64) -> Option<[f64; 2]> {
    if s == 0.0 {
        return Some(x0);
    }
    let steps = (s.abs() / h).ceil().max(1.0) as usize;
    let hs = s / steps as f64;
    let mut x = x0;
    for k in 0..steps {
        x = rk4(spec, x, t0 + k as f64 * hs, hs);
        if !inside_box(spec, x) {
            return None;
        }
    }
    Some(x)
}

/// Classical RK4 trace over `[s_min, s_max]` (containing 0), forward and backward from `x0`.
pub fn integrate_streamline(
    x0: [f64; 2],
    t0: f64,
    s_range: (f64, f64),
    spec: &ModelSpec,
    dx: f64,
) -> StreamlineTrace {
    let h = default_step(spec, dx);
    let mut exited = false;
    let mut forward = vec![(0.0, x0)];
    let mut backward = Vec::new();
    for (end, out, sign) in [(s_range.1.max(0.0), &mut forward, 1.0), (s_range.0.min(0.0), &mut backward, -1.0)] {
        let total = end.abs();
        if total == 0.0 {
            continue;
        }
        let steps = (total / h).ceil() as usize;
        let hs = sign * total / steps as f64;
        let mut x = x0;
        for k in 0..steps {
            x = rk4(spec, x, t0 + k as f64 * hs, hs);
            if !inside_box(spec, x) {
                exited = true;
                break;
            }
            out.push(((k + 1) as f64 * hs, x));
        }
    }
    backward.reverse();
    backward.extend(forward);
    StreamlineTrace { x0, t0, samples: backward, exited }
}

/// Pushes every set cell centre along its streamline for time `s`, rasterises, and dilates by one cell.
pub fn flow_map_set(mask: &Mask, t0: f64, s: f64, spec: &ModelSpec) -> Mask {
    dilate(&flow_map_cells(mask, t0, s, spec), mask.grid.dx)
}

/// Like [`flow_map_set`] without the one-cell dilation: each pushed centre marks the cell it lands in.
/// Centres that leave the domain are dropped.
pub fn flow_map_cells(mask: &Mask, t0: f64, s: f64, spec: &ModelSpec) -> Mask {
    let g = mask.grid;
    if s == 0.0 || spec.drift.is_zero() {
        return mask.clone();
    }
    let h = default_step(spec, g.dx);
    let mut out = Mask::empty(g);
    for k in mask.cells() {
        if let Some(y) = flow_point(spec, g.center(k), t0, s, h) {
            if let Some(c) = g.locate(y) {
                out.bits[c] = true;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, Drift, Exponent, InitialData, Source};

    fn spec(drift: Drift) -> ModelSpec {
        ModelSpec {
            m: Exponent::Finite(2.0),
            drift,
            source: Source::None,
            horizon: 1.0,
            domain: Domain { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] },
            init: InitialData::SmoothBump { center: vec![], radius: 0.5, amplitude: 1.0, exponent: 1.0 },
        }
    }

    #[test]
    fn stationary_without_drift() {
        let tr = integrate_streamline([0.3, -0.2], 0.0, (-0.5, 0.5), &spec(Drift::None), 0.05);
        assert!(tr.samples.iter().all(|(_, x)| *x == [0.3, -0.2]));
        assert!(!tr.exited);
    }

    #[test]
    fn constant_drift_moves_against_b() {
        let tr = integrate_streamline([0.0, 0.0], 0.0, (0.0, 0.7), &spec(Drift::Constant { velocity: vec![1.0, 0.0] }), 0.05);
        let (s, x) = *tr.samples.last().unwrap();
        assert!((s - 0.7).abs() < 1e-12);
        assert!((x[0] + 0.7).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn exit_is_flagged() {
        let tr = integrate_streamline([0.0, 0.0], 0.0, (0.0, 10.0), &spec(Drift::Constant { velocity: vec![1.0, 0.0] }), 0.05);
        assert!(tr.exited);
    }
}
