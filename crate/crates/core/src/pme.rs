//! Explicit conservative finite-volume integrator for
//! `rho_t = div(rho grad p + rho b) + rho f(x, t, p)`, `p = m/(m-1) rho^(m-1)`.
//!
//! The diffusive face flux is the difference of `rho^m` across the face, so
//! the update is monotone (hence order preserving and positive) whenever the
//! time step respects [`stable_dt`] with a small enough CFL fraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mass, Field, Grid};
use crate::model::{pressure_from_density, Barrier, Exponent, ModelSpec};

const EPS0: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "dt")]
pub enum DtPolicy {
    Adaptive,
    Fixed(f64),
}

fn default_cells() -> usize {
    128
}
fn default_cfl() -> f64 {
    0.4
}
fn default_max_dt() -> f64 {
    1e-2
}
fn default_margin() -> usize {
    4
}
fn default_policy() -> DtPolicy {
    DtPolicy::Adaptive
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
    /// Empty means `[0, T]`.
    #[serde(default)]
    pub save_times: Vec<f64>,
    /// Densities below this (or subnormal) are reset to zero and booked as clamped mass.
    #[serde(default)]
    pub positivity_floor: f64,
    #[serde(default = "default_margin")]
    pub margin: usize,
    #[serde(default = "default_policy")]
    pub dt_policy: DtPolicy,
    #[serde(skip)]
    pub barrier: Option<Barrier>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            cfl: default_cfl(),
            max_dt: default_max_dt(),
            save_times: Vec::new(),
            positivity_floor: 0.0,
            margin: default_margin(),
            dt_policy: DtPolicy::Adaptive,
            barrier: None,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl fraction {} not in (0, 1]", self.cfl)));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::InvalidParameter("max_dt must be positive".into()));
        }
        if let DtPolicy::Fixed(dt) = self.dt_policy {
            if !(dt > 0.0) {
                return Err(Error::InvalidParameter("fixed dt must be positive".into()));
            }
        }
        for w in self.save_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidParameter("save_times must be strictly increasing".into()));
            }
        }
        if self.save_times.iter().any(|&s| !(0.0..=horizon * (1.0 + 1e-12)).contains(&s)) {
            return Err(Error::InvalidParameter("save_times must lie in [0, T]".into()));
        }
        Ok(())
    }

    pub fn resolved_save_times(&self, horizon: f64) -> Vec<f64> {
        if self.save_times.is_empty() {
            if horizon > 0.0 {
                vec![0.0, horizon]
            } else {
                vec![0.0]
            }
        } else {
            self.save_times.iter().map(|&s| s.min(horizon)).collect()
        }
    }
}

/// Evenly spaced save times `0, T/k, ..., T`.
pub fn uniform_save_times(horizon: f64, frames: usize) -> Vec<f64> {
    (0..=frames).map(|k| horizon * k as f64 / frames as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub rho: Field,
    pub p: Field,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub spec: ModelSpec,
    pub snapshots: Vec<Snapshot>,
    pub mass_series: Vec<(f64, f64)>,
    pub step_log: Vec<f64>,
    /// Signed mass removed by clamping.
    pub clamped_mass: f64,
    /// Smallest density seen before clamping.
    pub min_before_clamp: f64,
    /// Saved frames whose thresholded support left the barrier ball (plus one cell).
    pub barrier_exceedances: usize,
}

impl Trajectory {
    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory has at least one snapshot")
    }
}

/// Largest step allowed by the diffusive, advective and reactive rates.
pub fn stable_dt(rho: &Field, spec: &ModelSpec, t: f64, cfg: &SolveConfig) -> Result<f64> {
    let m = spec.m.finite()?;
    let g = rho.grid;
    let c = m / (m - 1.0);
    let mut p_max: f64 = 0.0;
    let mut f_max: f64 = 0.0;
    for (k, &r) in rho.values.iter().enumerate() {
        let p = if r > 0.0 { c * r.powf(m - 1.0) } else { 0.0 };
        p_max = p_max.max(p);
        if r > 0.0 {
            f_max = f_max.max(spec.source.value(g.center(k), t, p).abs());
        }
    }
    Ok(dt_from_rates(g, m, p_max, spec.drift_bound(t), f_max, cfg))
}

fn dt_from_rates(g: Grid, m: f64, p_max: f64, b_max: f64, f_max: f64, cfg: &SolveConfig) -> f64 {
    let d_max = (m - 1.0) * p_max;
    let diff = g.dx * g.dx / (2.0 * g.dim as f64 * (d_max + EPS0));
    let adv = g.dx / (b_max + EPS0);
    let reac = 1.0 / (f_max + EPS0);
    (cfg.cfl * diff.min(adv).min(reac)).min(cfg.max_dt)
}

/// Index rectangle `[i0, i1] x [j0, j1]` (inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Region {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Region {
    fn full(g: Grid) -> Self {
        Self { i0: 0, i1: g.n - 1, j0: 0, j1: if g.dim == 2 { g.n - 1 } else { 0 } }
    }

    fn empty() -> Self {
        Self { i0: usize::MAX, i1: 0, j0: usize::MAX, j1: 0 }
    }

    fn is_empty(&self) -> bool {
        self.i0 > self.i1
    }

    fn include(&mut self, i: usize, j: usize) {
        self.i0 = self.i0.min(i);
        self.i1 = self.i1.max(i);
        self.j0 = self.j0.min(j);
        self.j1 = self.j1.max(j);
    }

    fn grow(&self, g: Grid, by: usize) -> Self {
        if self.is_empty() {
            return *self;
        }
        let top = g.n - 1;
        let jt = if g.dim == 2 { top } else { 0 };
        Self {
            i0: self.i0.saturating_sub(by),
            i1: (self.i1 + by).min(top),
            j0: self.j0.saturating_sub(by),
            j1: (self.j1 + by).min(jt),
        }
    }

    fn of_positive(values: &[f64], g: Grid) -> Self {
        let mut r = Self::empty();
        for (k, &v) in values.iter().enumerate() {
            if v > 0.0 {
                let (i, j) = g.coords(k);
                r.include(i, j);
            }
        }
        r
    }
}

/// Outcome of one explicit step.
#[derive(Clone, Debug)]
pub struct StepResult {
    pub rho: Field,
    pub clamped_mass: f64,
    pub min_before_clamp: f64,
}

struct StepStats {
    clamped_mass: f64,
    min_before_clamp: f64,
    rho_max: f64,
    positive: Region,
    above: Region,
}

struct Kernel<'a> {
    spec: &'a ModelSpec,
    g: Grid,
    m: f64,
    floor: f64,
    fx: Vec<f64>,
    fy: Vec<f64>,
    u: Vec<f64>,
    p: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(spec: &'a ModelSpec, g: Grid, floor: f64) -> Result<Self> {
        let m = spec.m.finite()?;
        Ok(Self { spec, g, m, floor, fx: Vec::new(), fy: Vec::new(), u: Vec::new(), p: Vec::new() })
    }

    /// Updates `out` on `reg` from `rho`; `reg` must contain every positive cell plus a one-cell ring.
    fn advance(
        &mut self,
        rho: &[f64],
        out: &mut [f64],
        reg: Region,
        t: f64,
        choose_dt: impl FnOnce(f64, f64) -> f64,
        rho_threshold: f64,
    ) -> Result<(StepStats, f64)> {
        let g = self.g;
        let n = g.n;
        let dx = g.dx;
        let m = self.m;
        let c = m / (m - 1.0);
        let w = reg.i1 - reg.i0 + 1;
        let h = reg.j1 - reg.j0 + 1;
        self.u.clear();
        self.p.clear();
        self.u.resize(w * h, 0.0);
        self.p.resize(w * h, 0.0);
        for jj in 0..h {
            let row = (reg.j0 + jj) * n + reg.i0;
            for ii in 0..w {
                let r = rho[row + ii];
                if r > 0.0 {
                    let p = c * r.powf(m - 1.0);
                    self.p[jj * w + ii] = p;
                    self.u[jj * w + ii] = r * p / c;
                }
            }
        }
        let source_zero = self.spec.source.is_zero();
        let p_max = self.p.iter().copied().fold(0.0, f64::max);
        let mut f_max: f64 = 0.0;
        if !source_zero {
            for jj in 0..h {
                for ii in 0..w {
                    let k = (reg.j0 + jj) * n + reg.i0 + ii;
                    if rho[k] > 0.0 {
                        f_max = f_max.max(self.spec.source.value(g.center(k), t, self.p[jj * w + ii]).abs());
                    }
                }
            }
        }
        let dt = choose_dt(p_max, f_max);
        let drift_zero = self.spec.drift.is_zero();
        let rho_at = |ii: isize, jj: isize| -> f64 {
            if ii < 0 || jj < 0 || ii >= w as isize || jj >= h as isize {
                0.0
            } else {
                rho[(reg.j0 + jj as usize) * n + reg.i0 + ii as usize]
            }
        };
        let u_at = |u: &[f64], ii: isize, jj: isize| -> f64 {
            if ii < 0 || jj < 0 || ii >= w as isize || jj >= h as isize {
                0.0
            } else {
                u[jj as usize * w + ii as usize]
            }
        };

        // Axis-0 faces: (w + 1) per row; face ii sits left of local cell ii.
        self.fx.clear();
        self.fx.resize((w + 1) * h, 0.0);
        for jj in 0..h {
            let y = if g.dim == 2 { g.origin[1] + ((reg.j0 + jj) as f64 + 0.5) * dx } else { 0.0 };
            for ii in 0..=w {
                let (l, r) = (ii as isize - 1, ii as isize);
                let jl = jj as isize;
                let mut flux = (u_at(&self.u, r, jl) - u_at(&self.u, l, jl)) / dx;
                if !drift_zero {
                    let x = g.origin[0] + (reg.i0 + ii) as f64 * dx;
                    let b = self.spec.drift.value([x, y], t)[0];
                    let up = if b < 0.0 { rho_at(l, jl) } else { rho_at(r, jl) };
                    flux += b * up;
                }
                self.fx[jj * (w + 1) + ii] = flux;
            }
        }
        if g.dim == 2 {
            self.fy.clear();
            self.fy.resize(w * (h + 1), 0.0);
            for jj in 0..=h {
                let y = g.origin[1] + (reg.j0 + jj) as f64 * dx;
                for ii in 0..w {
                    let (lo, hi) = (jj as isize - 1, jj as isize);
                    let il = ii as isize;
                    let mut flux = (u_at(&self.u, il, hi) - u_at(&self.u, il, lo)) / dx;
                    if !drift_zero {
                        let x = g.origin[0] + ((reg.i0 + ii) as f64 + 0.5) * dx;
                        let b = self.spec.drift.value([x, y], t)[1];
                        let up = if b < 0.0 { rho_at(il, lo) } else { rho_at(il, hi) };
                        flux += b * up;
                    }
                    self.fy[jj * w + ii] = flux;
                }
            }
        }

        let vol = g.cell_volume();
        let floor = self.floor.max(f64::MIN_POSITIVE);
        let mut st = StepStats {
            clamped_mass: 0.0,
            min_before_clamp: f64::INFINITY,
            rho_max: 0.0,
            positive: Region::empty(),
            above: Region::empty(),
        };
        let lam = dt / dx;
        for jj in 0..h {
            let j = reg.j0 + jj;
            for ii in 0..w {
                let i = reg.i0 + ii;
                let k = j * n + i;
                let r = rho[k];
                let mut div = self.fx[jj * (w + 1) + ii + 1] - self.fx[jj * (w + 1) + ii];
                if g.dim == 2 {
                    div += self.fy[(jj + 1) * w + ii] - self.fy[jj * w + ii];
                }
                let mut v = r + lam * div;
                if !source_zero && r > 0.0 {
                    let x = g.center(k);
                    v += dt * r * self.spec.source.value(x, t, self.p[jj * w + ii]);
                }
                if !v.is_finite() {
                    return Err(Error::NonFiniteState { time: t + dt, cell: k });
                }
                st.min_before_clamp = st.min_before_clamp.min(v);
                if v < floor {
                    if v != 0.0 {
                        st.clamped_mass += v * vol;
                    }
                    v = 0.0;
                } else {
                    st.positive.include(i, j);
                    st.rho_max = st.rho_max.max(v);
                    if v > rho_threshold {
                        st.above.include(i, j);
                    }
                }
                out[k] = v;
            }
        }
        Ok((st, dt))
    }
}

/// Density above which the pressure exceeds the default support threshold `max(1e-10, 1e-6 max p)`.
fn density_threshold(m: f64, rho_max: f64) -> f64 {
    let c = m / (m - 1.0);
    let p_max = c * rho_max.powf(m - 1.0);
    let p_thr = (1e-6 * p_max).max(1e-10);
    (p_thr / c).powf(1.0 / (m - 1.0))
}

/// One forward-Euler step on the whole grid.
pub fn step(rho: &Field, spec: &ModelSpec, t: f64, dt: f64, cfg: &SolveConfig) -> Result<StepResult> {
    let g = rho.grid;
    let mut kernel = Kernel::new(spec, g, cfg.positivity_floor)?;
    let mut out = rho.values.clone();
    let (st, _) = kernel.advance(&rho.values, &mut out, Region::full(g), t, |_, _| dt, f64::INFINITY)?;
    Ok(StepResult {
        rho: Field { grid: g, values: out, time: t + dt },
        clamped_mass: st.clamped_mass,
        min_before_clamp: st.min_before_clamp,
    })
}

/// Integrates from the scenario's initial data.
pub fn run(spec: &ModelSpec, cfg: &SolveConfig) -> Result<Trajectory> {
    spec.validate()?;
    let m = spec.m.finite()?;
    let grid = spec.domain.grid(cfg.cells)?;
    let rho0 = spec.init.density(grid, Exponent::Finite(m))?;
    run_from(spec, rho0, cfg)
}

fn margin_check(reg: Region, g: Grid, margin: usize, time: f64) -> Result<()> {
    if reg.is_empty() {
        return Ok(());
    }
    let top = g.n - 1;
    let bad_i = reg.i0 < margin || reg.i1 + margin > top;
    let bad_j = g.dim == 2 && (reg.j0 < margin || reg.j1 + margin > top);
    if bad_i || bad_j {
        let (i, j) = if reg.i0 < margin {
            (reg.i0, reg.j0)
        } else if reg.i1 + margin > top {
            (reg.i1, reg.j0)
        } else if reg.j0 < margin {
            (reg.i0, reg.j0)
        } else {
            (reg.i0, reg.j1)
        };
        return Err(Error::MarginViolation { time, cell: g.index(i, j), margin });
    }
    Ok(())
}

fn exceeds_barrier(rho: &Field, threshold: f64, barrier: &Barrier, t: f64) -> bool {
    let g = rho.grid;
    let r = barrier.radius(t) + g.dx;
    rho.values.iter().enumerate().any(|(k, &v)| {
        if v > threshold {
            let x = g.center(k);
            x[0].hypot(x[1]) > r
        } else {
            false
        }
    })
}

/// Integrates from the given initial density.
pub fn run_from(spec: &ModelSpec, rho0: Field, cfg: &SolveConfig) -> Result<Trajectory> {
    spec.validate()?;
    cfg.validate(spec.horizon)?;
    let m = spec.m.finite()?;
    let g = rho0.grid;
    let saves = cfg.resolved_save_times(spec.horizon);

    let mut cur = rho0.values.clone();
    if let Some(cell) = cur.iter().position(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::NegativeValue { cell, value: cur[cell] });
    }
    let mut next = cur.clone();
    // Cells each buffer may hold non-zero values in.
    let mut cur_written = Region::full(g);
    let mut next_written = Region::full(g);
    let mut positive = Region::of_positive(&cur, g);
    let mut rho_max = cur.iter().copied().fold(0.0, f64::max);
    {
        let thr = density_threshold(m, rho_max);
        let mut above = Region::empty();
        for (k, &v) in cur.iter().enumerate() {
            if v > thr {
                let (i, j) = g.coords(k);
                above.include(i, j);
            }
        }
        margin_check(above, g, cfg.margin, 0.0)?;
    }

    let vol = g.cell_volume();
    let b_max = spec.drift_bound(0.0);
    let mut kernel = Kernel::new(spec, g, cfg.positivity_floor)?;
    let mut traj = Trajectory {
        spec: spec.clone(),
        snapshots: Vec::with_capacity(saves.len()),
        mass_series: vec![(0.0, cur.iter().sum::<f64>() * vol)],
        step_log: Vec::new(),
        clamped_mass: 0.0,
        min_before_clamp: cur.iter().copied().fold(f64::INFINITY, f64::min),
        barrier_exceedances: 0,
    };

    let mut t = 0.0;
    let snap = |values: &[f64], t: f64, traj: &mut Trajectory, rho_max: f64| -> Result<()> {
        let rho = Field { grid: g, values: values.to_vec(), time: t };
        let mut p = pressure_from_density(&rho, Exponent::Finite(m))?;
        p.time = t;
        if let Some(b) = &cfg.barrier {
            if exceeds_barrier(&rho, density_threshold(m, rho_max), b, t) {
                traj.barrier_exceedances += 1;
            }
        }
        traj.snapshots.push(Snapshot { time: t, rho, p });
        Ok(())
    };

    for &target in &saves {
        while t < target {
            let reg = positive.grow(g, 1);
            let remaining = target - t;
            let eps = 1e-12 * spec.horizon.max(1e-300);
            let choose = |p_max: f64, f_max: f64| -> f64 {
                let base = match cfg.dt_policy {
                    DtPolicy::Fixed(dt) => dt,
                    DtPolicy::Adaptive => dt_from_rates(g, m, p_max, b_max, f_max, cfg),
                };
                if base >= remaining - eps {
                    remaining
                } else {
                    base
                }
            };
            // Clear what the scratch buffer held outside the region about to be written.
            if !next_written.is_empty() && next_written != reg {
                for j in next_written.j0..=next_written.j1 {
                    let row = j * g.n;
                    next[row + next_written.i0..=row + next_written.i1].fill(0.0);
                }
            }
            let thr = density_threshold(m, rho_max);
            let (st, dt) = if reg.is_empty() {
                let empty = StepStats {
                    clamped_mass: 0.0,
                    min_before_clamp: 0.0,
                    rho_max: 0.0,
                    positive: Region::empty(),
                    above: Region::empty(),
                };
                (empty, choose(0.0, 0.0))
            } else {
                kernel.advance(&cur, &mut next, reg, t, choose, thr)?
            };
            let hit = dt == remaining;
            std::mem::swap(&mut cur, &mut next);
            next_written = cur_written;
            cur_written = reg;
            t = if hit { target } else { t + dt };
            positive = st.positive;
            rho_max = st.rho_max;
            traj.clamped_mass += st.clamped_mass;
            traj.min_before_clamp = traj.min_before_clamp.min(st.min_before_clamp);
            traj.step_log.push(dt);
            let mut total = 0.0;
            if !reg.is_empty() {
                for j in reg.j0..=reg.j1 {
                    total += cur[j * g.n + reg.i0..=j * g.n + reg.i1].iter().sum::<f64>();
                }
            }
            traj.mass_series.push((t, total * vol));
            margin_check(st.above, g, cfg.margin, t)?;
        }
        snap(&cur, t, &mut traj, rho_max)?;
    }
    Ok(traj)
}

/// Mass of each saved density.
pub fn snapshot_masses(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.snapshots.iter().map(|s| (s.time, mass(&s.rho))).collect()
}
