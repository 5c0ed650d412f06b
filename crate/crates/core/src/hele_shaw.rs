//! Splitting solver for the incompressible limit: an upwind transport/growth
//! step followed by a projection onto `rho <= 1`, posed as the linear
//! complementarity problem
//!
//! `w = 1 - rho* - lag + M p >= 0`, `p >= 0`, `p w = 0`, with `M = -dt Delta_h`,
//!
//! solved by projected SOR. `lag` carries the change of the growth term when
//! `f` depends on `p` and is refreshed every sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{mass, Field, Grid};
use crate::model::{Exponent, ModelSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsorConfig {
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_tol")]
    pub tol_residual: f64,
    #[serde(default = "default_sweeps")]
    pub max_sweeps: usize,
}

fn default_omega() -> f64 {
    1.7
}
fn default_tol() -> f64 {
    1e-8
}
fn default_sweeps() -> usize {
    20_000
}

impl Default for PsorConfig {
    fn default() -> Self {
        Self { omega: default_omega(), tol_residual: default_tol(), max_sweeps: default_sweeps() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitState {
    pub rho: Field,
    pub p: Field,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Optional inputs that make the projection consistent with a preceding growth step.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProjectionContext<'a> {
    /// Density before the transport/growth step and the pressure used in its source term.
    pub growth_base: Option<(&'a Field, &'a Field)>,
    pub warm_start: Option<&'a Field>,
}

/// `rho* = rho + dt [div(rho b) + rho f(x, t, p)]`, advection upwinded along `-b`.
pub fn transport_growth_step(state: &LimitState, spec: &ModelSpec, dt: f64) -> Result<Field> {
    let g = state.rho.grid;
    let t = state.time;
    let n = g.n;
    let rho = &state.rho.values;
    let mut out = rho.clone();
    if !spec.drift.is_zero() {
        let lam = dt / g.dx;
        let rows = if g.dim == 2 { n } else { 1 };
        // Axis 0.
        for j in 0..rows {
            let y = if g.dim == 2 { g.origin[1] + (j as f64 + 0.5) * g.dx } else { 0.0 };
            for k in 0..=n {
                let x = g.origin[0] + k as f64 * g.dx;
                let b = spec.drift.value([x, y], t)[0];
                let up = if b < 0.0 { k.checked_sub(1) } else { (k < n).then_some(k) };
                let flux = match up {
                    Some(i) => b * rho[j * n + i],
                    None => 0.0,
                };
                if flux != 0.0 {
                    if k > 0 {
                        out[j * n + k - 1] += lam * flux;
                    }
                    if k < n {
                        out[j * n + k] -= lam * flux;
                    }
                }
            }
        }
        if g.dim == 2 {
            for k in 0..=n {
                let y = g.origin[1] + k as f64 * g.dx;
                for i in 0..n {
                    let x = g.origin[0] + (i as f64 + 0.5) * g.dx;
                    let b = spec.drift.value([x, y], t)[1];
                    let up = if b < 0.0 { k.checked_sub(1) } else { (k < n).then_some(k) };
                    let flux = match up {
                        Some(jj) => b * rho[jj * n + i],
                        None => 0.0,
                    };
                    if flux != 0.0 {
                        if k > 0 {
                            out[(k - 1) * n + i] += lam * flux;
                        }
                        if k < n {
                            out[k * n + i] -= lam * flux;
                        }
                    }
                }
            }
        }
    }
    if !spec.source.is_zero() {
        for (k, o) in out.iter_mut().enumerate() {
            let r = rho[k];
            if r > 0.0 {
                *o += dt * r * spec.source.value(g.center(k), t, state.p.values[k]);
            }
        }
    }
    for (k, o) in out.iter_mut().enumerate() {
        if !o.is_finite() {
            return Err(Error::NonFiniteState { time: t + dt, cell: k });
        }
        if *o < 0.0 {
            *o = 0.0;
        }
    }
    Ok(Field { grid: g, values: out, time: t + dt })
}

/// Projection without growth coupling or warm start.
pub fn complementarity_solve(
    rho_star: &Field,
    spec: &ModelSpec,
    t: f64,
    cfg: &PsorConfig,
    dt: f64,
) -> Result<(LimitState, SolveReport)> {
    complementarity_solve_with(rho_star, spec, t, cfg, dt, ProjectionContext::default())
}

#[derive(Clone, Copy)]
struct Window {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Window {
    fn around(rho: &[f64], g: Grid, pad: usize) -> Option<Self> {
        let mut w: Option<Window> = None;
        for (k, &v) in rho.iter().enumerate() {
            if v > 0.0 {
                let (i, j) = g.coords(k);
                w = Some(match w {
                    None => Window { i0: i, i1: i, j0: j, j1: j },
                    Some(w) => Window { i0: w.i0.min(i), i1: w.i1.max(i), j0: w.j0.min(j), j1: w.j1.max(j) },
                });
            }
        }
        w.map(|w| w.grow(g, pad))
    }

    fn grow(&self, g: Grid, pad: usize) -> Self {
        let top = g.n - 1;
        let jt = if g.dim == 2 { top } else { 0 };
        Window {
            i0: self.i0.saturating_sub(pad),
            i1: (self.i1 + pad).min(top),
            j0: self.j0.saturating_sub(pad),
            j1: (self.j1 + pad).min(jt),
        }
    }

    /// Whether pressure is positive on the window rim while the window can still grow.
    fn needs_growth(&self, p: &[f64], g: Grid) -> bool {
        let top = g.n - 1;
        let rim = |i: usize, j: usize| p[g.index(i, j)] > 0.0;
        let mut hit = false;
        if self.i0 > 0 {
            hit |= (self.j0..=self.j1).any(|j| rim(self.i0, j));
        }
        if self.i1 < top {
            hit |= (self.j0..=self.j1).any(|j| rim(self.i1, j));
        }
        if g.dim == 2 {
            if self.j0 > 0 {
                hit |= (self.i0..=self.i1).any(|i| rim(i, self.j0));
            }
            if self.j1 < top {
                hit |= (self.i0..=self.i1).any(|i| rim(i, self.j1));
            }
        }
        hit
    }
}

/// Projected SOR for the complementarity problem; returns the projected state.
pub fn complementarity_solve_with(
    rho_star: &Field,
    spec: &ModelSpec,
    t: f64,
    cfg: &PsorConfig,
    dt: f64,
    ctx: ProjectionContext<'_>,
) -> Result<(LimitState, SolveReport)> {
    if !(cfg.omega > 0.0 && cfg.omega < 2.0) {
        return Err(Error::InvalidParameter(format!("relaxation {} not in (0, 2)", cfg.omega)));
    }
    let g = rho_star.grid;
    let n = g.n;
    if let Some(cell) = rho_star.values.iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::NegativeValue { cell, value: rho_star.values[cell] });
    }
    let mut p = match ctx.warm_start {
        Some(w) => {
            g.check_same(&w.grid)?;
            w.values.iter().map(|&v| v.max(0.0)).collect()
        }
        None => vec![0.0; g.len()],
    };
    let coupled = ctx.growth_base.is_some() && !spec.source.is_zero();
    let mut lag = vec![0.0; g.len()];
    let mut report = SolveReport { sweeps: 0, residual: 0.0, converged: true };

    let needs_solve = rho_star.values.iter().any(|&v| v > 1.0) || p.iter().any(|&v| v > 0.0);
    if needs_solve {
        let off = dt / (g.dx * g.dx);
        let diag = 2.0 * g.dim as f64 * off;
        let inv_diag = 1.0 / diag;
        let mut win = Window::around(&rho_star.values, g, 3).unwrap_or(Window { i0: 0, i1: n - 1, j0: 0, j1: 0 });
        // Pressure outside the window is zero.
        for k in 0..g.len() {
            let (i, j) = g.coords(k);
            if i < win.i0 || i > win.i1 || j < win.j0 || j > win.j1 {
                p[k] = 0.0;
            }
        }
        let base = ctx.growth_base;
        let omega = cfg.omega;
        loop {
            let mut converged = false;
            while report.sweeps < cfg.max_sweeps {
                report.sweeps += 1;
                let mut res: f64 = 0.0;
                for j in win.j0..=win.j1 {
                    for i in win.i0..=win.i1 {
                        let k = j * n + i;
                        let mut nb = 0.0;
                        if i > 0 {
                            nb += p[k - 1];
                        }
                        if i + 1 < n {
                            nb += p[k + 1];
                        }
                        if g.dim == 2 {
                            if j > 0 {
                                nb += p[k - n];
                            }
                            if j + 1 < n {
                                nb += p[k + n];
                            }
                        }
                        if coupled {
                            let (r0, p0) = base.unwrap();
                            let r = r0.values[k];
                            if r > 0.0 {
                                let x = g.center(k);
                                lag[k] = dt * r * (spec.source.value(x, t, p[k]) - spec.source.value(x, t, p0.values[k]));
                            }
                        }
                        let w = 1.0 - rho_star.values[k] - lag[k] + diag * p[k] - off * nb;
                        res = res.max((diag * p[k]).min(w).abs());
                        let upd = (p[k] - omega * w * inv_diag).max(0.0);
                        p[k] = upd;
                    }
                }
                report.residual = res;
                if res <= cfg.tol_residual {
                    converged = true;
                    break;
                }
            }
            if converged && win.needs_growth(&p, g) {
                win = win.grow(g, 3);
                continue;
            }
            report.converged = converged;
            break;
        }
        if coupled {
            let (r0, p0) = base.unwrap();
            for k in 0..g.len() {
                let r = r0.values[k];
                if r > 0.0 {
                    let x = g.center(k);
                    lag[k] = dt * r * (spec.source.value(x, t, p[k]) - spec.source.value(x, t, p0.values[k]));
                }
            }
        }
    }

    let pf = Field { grid: g, values: p, time: t };
    let mut rho = rho_star.values.clone();
    if pf.values.iter().any(|&v| v > 0.0) {
        let lap = crate::grid::laplacian(&pf);
        for k in 0..g.len() {
            rho[k] += lag[k] + dt * lap.values[k];
        }
    }
    for v in rho.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok((LimitState { rho: Field { grid: g, values: rho, time: t }, p: pf, time: t }, report))
}

fn default_limit_cells() -> usize {
    128
}
fn default_limit_cfl() -> f64 {
    0.25
}
fn default_limit_max_dt() -> f64 {
    1e-2
}
fn default_avg_steps() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    #[serde(default = "default_limit_cells")]
    pub cells: usize,
    #[serde(default = "default_limit_cfl")]
    pub cfl: f64,
    #[serde(default = "default_limit_max_dt")]
    pub max_dt: f64,
    #[serde(default)]
    pub save_times: Vec<f64>,
    #[serde(default)]
    pub psor: PsorConfig,
    /// Steps averaged forward in time for the reported pressure.
    #[serde(default = "default_avg_steps")]
    pub avg_steps: usize,
    /// Complementarity tolerance; defaults to `1e-6 * domain volume`.
    #[serde(default)]
    pub tol_c: Option<f64>,
}

impl Default for LimitConfig {
    fn default() -> Self {
        Self {
            cells: default_limit_cells(),
            cfl: default_limit_cfl(),
            max_dt: default_limit_max_dt(),
            save_times: Vec::new(),
            psor: PsorConfig::default(),
            avg_steps: default_avg_steps(),
            tol_c: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitSnapshot {
    pub time: f64,
    pub rho: Field,
    /// Pressure of the step that produced `rho` (the initial solve at t = 0).
    pub p: Field,
    /// Forward average of the pressure over the next `avg_steps` steps.
    pub p_avg: Field,
    pub complementarity: f64,
}

#[derive(Clone, Debug)]
pub struct LimitTrajectory {
    pub spec: ModelSpec,
    pub snapshots: Vec<LimitSnapshot>,
    pub mass_series: Vec<(f64, f64)>,
    pub step_log: Vec<f64>,
    pub psor_log: Vec<SolveReport>,
    pub max_rho: f64,
    pub tol_c: f64,
}

impl LimitTrajectory {
    pub fn non_converged(&self) -> usize {
        self.psor_log.iter().filter(|r| !r.converged).count()
    }
}

fn limit_dt(state: &LimitState, spec: &ModelSpec, cfg: &LimitConfig, b_max: f64) -> f64 {
    let g = state.rho.grid;
    let mut f_max: f64 = 0.0;
    for (k, &r) in state.rho.values.iter().enumerate() {
        if r > 0.0 {
            f_max = f_max.max(spec.source.value(g.center(k), state.time, state.p.values[k]).abs());
        }
    }
    let adv = g.dx / (b_max + 1e-14);
    let reac = 1.0 / (f_max + 1e-14);
    (cfg.cfl * adv.min(reac)).min(cfg.max_dt)
}

fn complementarity_l1(rho: &Field, p: &Field) -> f64 {
    let s: f64 = rho.values.iter().zip(&p.values).map(|(r, q)| (q * (1.0 - r)).abs()).sum();
    s * rho.grid.cell_volume()
}

struct Pending {
    index: usize,
    weight: f64,
    acc: Vec<f64>,
    steps: usize,
}

/// Alternates growth/transport and projection from the limit initial density.
pub fn run_limit(spec: &ModelSpec, cfg: &LimitConfig) -> Result<LimitTrajectory> {
    spec.validate()?;
    if !spec.m.is_infinite() {
        return Err(Error::InvalidModel("run_limit needs m = infinite".into()));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) || !(cfg.max_dt > 0.0) {
        return Err(Error::InvalidParameter("limit cfl must be in (0, 1] and max_dt positive".into()));
    }
    let grid = spec.domain.grid(cfg.cells)?;
    let rho0 = spec.init.density(grid, Exponent::Infinite)?;
    if let Some(cell) = rho0.values.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidModel(format!(
            "limit initial density {} outside [0, 1] at cell {cell}",
            rho0.values[cell]
        )));
    }
    let saves = if cfg.save_times.is_empty() { vec![0.0, spec.horizon] } else { cfg.save_times.clone() };
    for w in saves.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidParameter("save_times must be strictly increasing".into()));
        }
    }
    let tol_c = cfg.tol_c.unwrap_or(1e-6 * spec.domain.volume());
    let b_max = spec.drift_bound(0.0);

    let mut traj = LimitTrajectory {
        spec: spec.clone(),
        snapshots: Vec::new(),
        mass_series: vec![(0.0, mass(&rho0))],
        step_log: Vec::new(),
        psor_log: Vec::new(),
        max_rho: rho0.max(),
        tol_c,
    };

    // Initial pressure: one growth step and projection, keeping the initial density.
    let zero_p = Field::zeros(grid, 0.0);
    let mut state = LimitState { rho: rho0.clone(), p: zero_p.clone(), time: 0.0 };
    let dt0 = limit_dt(&state, spec, cfg, b_max);
    let star = transport_growth_step(&state, spec, dt0)?;
    let (proj, rep) = complementarity_solve_with(
        &star,
        spec,
        0.0,
        &cfg.psor,
        dt0,
        ProjectionContext { growth_base: Some((&rho0, &zero_p)), warm_start: None },
    )?;
    traj.psor_log.push(rep);
    state.p = proj.p;

    let avg_steps = cfg.avg_steps.max(1);
    let mut pending: Vec<Pending> = Vec::new();
    let mut next_save = 0;
    let mut t = 0.0;
    let mut first_step = true;
    // The first step reuses the initial solve as its projection result.
    let mut initial = Some(proj.rho);

    loop {
        while next_save < saves.len() && saves[next_save] <= t + 1e-12 * spec.horizon {
            traj.snapshots.push(LimitSnapshot {
                time: saves[next_save],
                rho: state.rho.clone(),
                p: state.p.clone(),
                p_avg: Field::zeros(grid, saves[next_save]),
                complementarity: complementarity_l1(&state.rho, &state.p),
            });
            pending.push(Pending { index: traj.snapshots.len() - 1, weight: 0.0, acc: vec![0.0; grid.len()], steps: 0 });
            next_save += 1;
        }
        if next_save >= saves.len() && pending.is_empty() {
            break;
        }
        let mut dt = if first_step { dt0 } else { limit_dt(&state, spec, cfg, b_max) };
        if next_save < saves.len() && t + dt > saves[next_save] - 1e-12 * spec.horizon {
            dt = saves[next_save] - t;
        }
        let reuse = if first_step && dt == dt0 { initial.take() } else { None };
        let (rho_new, p_new) = if let Some(r) = reuse {
            (r, state.p.clone())
        } else {
            let star = transport_growth_step(&state, spec, dt)?;
            let (proj, rep) = complementarity_solve_with(
                &star,
                spec,
                t,
                &cfg.psor,
                dt,
                ProjectionContext { growth_base: Some((&state.rho, &state.p)), warm_start: Some(&state.p) },
            )?;
            traj.psor_log.push(rep);
            (proj.rho, proj.p)
        };
        first_step = false;
        for pd in pending.iter_mut() {
            for (a, &v) in pd.acc.iter_mut().zip(&p_new.values) {
                *a += dt * v;
            }
            pd.weight += dt;
            pd.steps += 1;
        }
        pending.retain(|pd| {
            if pd.steps >= avg_steps {
                let snap = &mut traj.snapshots[pd.index];
                snap.p_avg.values = pd.acc.iter().map(|a| a / pd.weight).collect();
                false
            } else {
                true
            }
        });
        t = if next_save < saves.len() && (t + dt - saves[next_save]).abs() <= 1e-12 * spec.horizon {
            saves[next_save]
        } else {
            t + dt
        };
        traj.max_rho = traj.max_rho.max(rho_new.max());
        traj.step_log.push(dt);
        traj.mass_series.push((t, mass(&rho_new)));
        state = LimitState {
            rho: Field { grid, values: rho_new.values, time: t },
            p: Field { grid, values: p_new.values, time: t },
            time: t,
        };
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Domain, Drift, InitialData, Source};

    fn spec1(source: Source) -> ModelSpec {
        ModelSpec {
            m: Exponent::Infinite,
            drift: Drift::None,
            source,
            horizon: 0.1,
            domain: Domain { lo: vec![-2.0], hi: vec![2.0] },
            init: InitialData::Patch { center: vec![], radius: 0.5, level: 1.0, mollify_cells: 0 },
        }
    }

    #[test]
    fn inactive_constraint() {
        let s = spec1(Source::None);
        let g = s.domain.grid(64).unwrap();
        let rs = Field::from_fn(g, 0.0, |x| if x[0].abs() < 0.5 { 0.7 } else { 0.0 });
        let (st, rep) = complementarity_solve(&rs, &s, 0.0, &PsorConfig::default(), 0.01).unwrap();
        assert!(rep.converged);
        assert!(st.p.values.iter().all(|&v| v == 0.0));
        assert_eq!(st.rho.values, rs.values);
    }

    #[test]
    fn no_transport_no_growth() {
        let s = spec1(Source::None);
        let g = s.domain.grid(64).unwrap();
        let rho = Field::from_fn(g, 0.0, |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 });
        let st = LimitState { p: Field::zeros(g, 0.0), rho: rho.clone(), time: 0.0 };
        assert_eq!(transport_growth_step(&st, &s, 0.01).unwrap().values, rho.values);
    }

    #[test]
    fn unit_growth_step() {
        let s = spec1(Source::Constant { value: 1.0 });
        let g = s.domain.grid(64).unwrap();
        let rho = Field::from_fn(g, 0.0, |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 });
        let st = LimitState { p: Field::zeros(g, 0.0), rho: rho.clone(), time: 0.0 };
        let out = transport_growth_step(&st, &s, 0.01).unwrap();
        for (a, b) in out.values.iter().zip(&rho.values) {
            if *b == 1.0 {
                assert!((a - 1.01).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_horizon_snapshot_is_initial() {
        let mut s = spec1(Source::Constant { value: 1.0 });
        s.horizon = 1.0;
        let cfg = LimitConfig { cells: 64, save_times: vec![0.0], ..Default::default() };
        let tr = run_limit(&s, &cfg).unwrap();
        assert_eq!(tr.snapshots.len(), 1);
        let g = s.domain.grid(64).unwrap();
        assert_eq!(tr.snapshots[0].rho, s.init.density(g, Exponent::Infinite).unwrap());
        assert!(tr.snapshots[0].p_avg.max() > 0.0);
    }
}
