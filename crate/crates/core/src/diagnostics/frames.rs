use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{default_threshold, frontier_from_support, FrontierRecord};
use crate::grid::{linf_norm, Field, Grid, Mask};
use crate::hele_shaw::LimitTrajectory;
use crate::model::{Exponent, ModelSpec};
use crate::pme::Trajectory;

/// How a frame's positivity set is read off the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportRule {
    /// `p > max(1e-10, 1e-6 |p|_inf)`.
    #[default]
    Pressure,
    /// `rho > max(1e-10, 1e-6 |rho|_inf)`; keeps regions where `p` underflows at large `m`.
    /// Only meaningful for finite `m`, where `{rho > 0}` and `{p > 0}` coincide.
    Density,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub rho: Field,
    /// For the limit problem, the forward-averaged pressure.
    pub p: Field,
    pub support: Mask,
}

impl Frame {
    pub fn new(time: f64, rho: Field, p: Field, rule: SupportRule) -> Self {
        let support = match rule {
            SupportRule::Pressure => p.support(default_threshold(&p)),
            SupportRule::Density => rho.support((1e-6 * linf_norm(&rho)).max(1e-10)),
        };
        Self { time, rho, p, support }
    }

    pub fn frontier(&self) -> FrontierRecord {
        frontier_from_support(self.support.clone(), self.time)
    }
}

#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub spec: ModelSpec,
    pub frames: Vec<Frame>,
}

impl FrameSeries {
    pub fn from_trajectory(traj: &Trajectory, rule: SupportRule) -> Self {
        let frames =
            traj.snapshots.iter().map(|s| Frame::new(s.time, s.rho.clone(), s.p.clone(), rule)).collect();
        Self { spec: traj.spec.clone(), frames }
    }

    /// The limit support is always read from the pressure: `{p > 0}` is in general a strict
    /// subset of `{rho > 0}` there (unsaturated regions).
    pub fn from_limit(traj: &LimitTrajectory) -> Self {
        let frames = traj
            .snapshots
            .iter()
            .map(|s| Frame::new(s.time, s.rho.clone(), s.p_avg.clone(), SupportRule::Pressure))
            .collect();
        Self { spec: traj.spec.clone(), frames }
    }

    pub fn m(&self) -> Exponent {
        self.spec.m
    }

    pub fn grid(&self) -> Result<Grid> {
        self.frames.first().map(|f| f.rho.grid).ok_or_else(|| Error::Insufficient("no frames".into()))
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    /// Index of the frame at `t` (to a relative 1e-9).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.frames.iter().position(|f| (f.time - t).abs() <= 1e-9 * (1.0 + t.abs()))
    }

    pub fn at(&self, t: f64) -> Result<&Frame> {
        self.index_of(t).map(|i| &self.frames[i]).ok_or_else(|| Error::Insufficient(format!("no frame at t = {t}")))
    }

    /// Mean spacing between consecutive frames.
    pub fn frame_spacing(&self) -> f64 {
        let n = self.frames.len();
        if n < 2 {
            return 0.0;
        }
        (self.frames[n - 1].time - self.frames[0].time) / (n - 1) as f64
    }
}

/// Every k-th cell of the mask in raster order, with k chosen so at most `limit` cells come back.
pub fn sample_cells(mask: &Mask, limit: usize) -> Vec<usize> {
    let count = mask.count();
    let stride = count.div_ceil(limit.max(1)).max(1);
    mask.cells().step_by(stride).collect()
}

pub fn check_common(series: &[&FrameSeries]) -> Result<()> {
    let first = series.first().ok_or_else(|| Error::Insufficient("no series".into()))?;
    let g = first.grid()?;
    let times = first.times();
    for s in series {
        s.grid()?.check_same(&g)?;
        let other = s.times();
        if other.len() != times.len() || other.iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs())) {
            return Err(Error::GridMismatch("series use different save times".into()));
        }
    }
    Ok(())
}
