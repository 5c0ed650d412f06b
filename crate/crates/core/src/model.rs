//! Problem definition: exponent, drift, source, initial data, domain and horizon,
//! plus the sampled assumption audit and the derived constants.

use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::{laplacian, read_snapshot, Field, Grid};

/// Nonlinearity exponent `m`, or the incompressible limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinite,
}

impl Exponent {
    pub fn finite(self) -> Result<f64> {
        match self {
            Exponent::Finite(m) => Ok(m),
            Exponent::Infinite => Err(Error::InfiniteExponent),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinite)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(m) => write!(f, "{m}"),
            Exponent::Infinite => f.write_str("infinite"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExponentRepr {
    Number(f64),
    Word(String),
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Exponent::Finite(m) => ExponentRepr::Number(m),
            Exponent::Infinite => ExponentRepr::Word("infinite".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ExponentRepr::deserialize(d)? {
            ExponentRepr::Number(m) => Ok(Exponent::Finite(m)),
            ExponentRepr::Word(w) if w == "infinite" => Ok(Exponent::Infinite),
            ExponentRepr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"infinite\", found \"{w}\""
            ))),
        }
    }
}

/// Axis-aligned box; all axes must have the same extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn grid(&self, cells_per_axis: usize) -> Result<Grid> {
        Grid::new(self.dim(), cells_per_axis, &self.lo, &self.hi)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

fn component(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(0.0)
}

/// Drift field `b(x, t)`, a closed family with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    None,
    Constant { velocity: Vec<f64> },
    /// `b = omega * (-(x2 - c2), x1 - c1)`.
    Rotation {
        omega: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `b = (rate * x2, 0)`.
    Shear { rate: f64 },
    /// `b = strength * (x - center)`.
    GradientOfPotential {
        strength: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
}

impl Drift {
    pub fn value(&self, x: [f64; 2], _t: f64) -> [f64; 2] {
        match self {
            Drift::None => [0.0, 0.0],
            Drift::Constant { velocity } => [component(velocity, 0), component(velocity, 1)],
            Drift::Rotation { omega, center } => [
                -omega * (x[1] - component(center, 1)),
                omega * (x[0] - component(center, 0)),
            ],
            Drift::Shear { rate } => [rate * x[1], 0.0],
            Drift::GradientOfPotential { strength, center } => [
                strength * (x[0] - component(center, 0)),
                strength * (x[1] - component(center, 1)),
            ],
        }
    }

    /// Divergence in dimension `dim`.
    pub fn div(&self, _x: [f64; 2], _t: f64, dim: usize) -> f64 {
        match self {
            Drift::GradientOfPotential { strength, .. } => strength * dim as f64,
            _ => 0.0,
        }
    }

    /// `J[a][b] = d b_a / d x_b`.
    pub fn jacobian(&self, _x: [f64; 2], _t: f64, dim: usize) -> [[f64; 2]; 2] {
        match self {
            Drift::None | Drift::Constant { .. } => [[0.0; 2]; 2],
            Drift::Rotation { omega, .. } => [[0.0, -omega], [*omega, 0.0]],
            Drift::Shear { rate } => [[0.0, *rate], [0.0, 0.0]],
            Drift::GradientOfPotential { strength, .. } => {
                if dim == 1 {
                    [[*strength, 0.0], [0.0, 0.0]]
                } else {
                    [[*strength, 0.0], [0.0, *strength]]
                }
            }
        }
    }

    /// Frobenius norm of the second spatial derivatives; every kind here is at most affine.
    pub fn hessian_norm(&self, _x: [f64; 2], _t: f64) -> f64 {
        0.0
    }

    pub fn time_derivative(&self, _x: [f64; 2], _t: f64) -> [f64; 2] {
        [0.0, 0.0]
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Drift::None => true,
            Drift::Constant { velocity } => velocity.iter().all(|&v| v == 0.0),
            Drift::Rotation { omega, .. } => *omega == 0.0,
            Drift::Shear { rate } => *rate == 0.0,
            Drift::GradientOfPotential { strength, .. } => *strength == 0.0,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check_len = |v: &Vec<f64>, what: &str, allow_empty: bool| {
            if v.len() == dim || (allow_empty && v.is_empty()) {
                Ok(())
            } else {
                Err(Error::InvalidModel(format!("drift {what} has {} components in dimension {dim}", v.len())))
            }
        };
        match self {
            Drift::None => Ok(()),
            Drift::Constant { velocity } => check_len(velocity, "velocity", false),
            Drift::Rotation { .. } | Drift::Shear { .. } if dim != 2 => {
                Err(Error::InvalidModel("rotation and shear drifts need dimension 2".into()))
            }
            Drift::Rotation { center, .. } => check_len(center, "center", true),
            Drift::Shear { .. } => Ok(()),
            Drift::GradientOfPotential { center, .. } => check_len(center, "center", true),
        }
    }
}

/// Source `f(x, t, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    None,
    Constant { value: f64 },
    /// `f = a - p`.
    Logistic { a: f64 },
    /// `f = c0 + cx . x + cxx |x|^2 + ct t + cp p`.
    Polynomial {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cx: Vec<f64>,
        #[serde(default)]
        cxx: f64,
        #[serde(default)]
        ct: f64,
        #[serde(default)]
        cp: f64,
    },
}

impl Source {
    pub fn value(&self, x: [f64; 2], t: f64, p: f64) -> f64 {
        match self {
            Source::None => 0.0,
            Source::Constant { value } => *value,
            Source::Logistic { a } => a - p,
            Source::Polynomial { c0, cx, cxx, ct, cp } => {
                c0 + component(cx, 0) * x[0]
                    + component(cx, 1) * x[1]
                    + cxx * (x[0] * x[0] + x[1] * x[1])
                    + ct * t
                    + cp * p
            }
        }
    }

    pub fn dp(&self, _x: [f64; 2], _t: f64, _p: f64) -> f64 {
        match self {
            Source::None | Source::Constant { .. } => 0.0,
            Source::Logistic { .. } => -1.0,
            Source::Polynomial { cp, .. } => *cp,
        }
    }

    pub fn grad_x(&self, x: [f64; 2], _t: f64, _p: f64) -> [f64; 2] {
        match self {
            Source::Polynomial { cx, cxx, .. } => {
                [component(cx, 0) + 2.0 * cxx * x[0], component(cx, 1) + 2.0 * cxx * x[1]]
            }
            _ => [0.0, 0.0],
        }
    }

    pub fn dt(&self, _x: [f64; 2], _t: f64, _p: f64) -> f64 {
        match self {
            Source::Polynomial { ct, .. } => *ct,
            _ => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Source::None => true,
            Source::Constant { value } => *value == 0.0,
            Source::Logistic { .. } => false,
            Source::Polynomial { c0, cx, cxx, ct, cp } => {
                *c0 == 0.0 && cx.iter().all(|&c| c == 0.0) && *cxx == 0.0 && *ct == 0.0 && *cp == 0.0
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Source::Polynomial { cx, .. } = self {
            if !(cx.is_empty() || cx.len() == dim) {
                return Err(Error::InvalidModel(format!("source cx has {} components in dimension {dim}", cx.len())));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Density,
    Pressure,
}

fn default_level() -> f64 {
    1.0
}

fn default_mollify() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// Self-similar source-type solution evaluated at time `t0`, with support radius `radius` there.
    Barenblatt {
        t0: f64,
        radius: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `p = amplitude * (radius^2 - |x - center|^2)_+^exponent`.
    SmoothBump {
        #[serde(default)]
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
        exponent: f64,
    },
    /// Density `level` on a ball; mollified by a ball average for finite `m`.
    Patch {
        #[serde(default)]
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_level")]
        level: f64,
        #[serde(default = "default_mollify")]
        mollify_cells: usize,
    },
    /// Core `1/2 + |x|^2/2` on the unit ball, saturated shell out to radius 2.
    AnnulusPlusCore,
    CustomGrid { path: PathBuf, quantity: Quantity },
}

/// Constants of the source-type solution `p = m/(m-1) t^{-a(m-1)} (C - k |x|^2 t^{-2b})_+`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BarenblattProfile {
    pub m: f64,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub c: f64,
}

impl BarenblattProfile {
    pub fn new(m: f64, dim: usize, t0: f64, radius: f64) -> Self {
        let d = dim as f64;
        let alpha = d / (d * (m - 1.0) + 2.0);
        let beta = alpha / d;
        let k = alpha * (m - 1.0) / (2.0 * m * d);
        let c = k * radius * radius * t0.powf(-2.0 * beta);
        Self { m, dim, alpha, beta, k, c }
    }

    pub fn pressure(&self, r2: f64, t: f64) -> f64 {
        let inner = (self.c - self.k * r2 * t.powf(-2.0 * self.beta)).max(0.0);
        self.m / (self.m - 1.0) * t.powf(-self.alpha * (self.m - 1.0)) * inner
    }

    pub fn radius(&self, t: f64) -> f64 {
        (self.c / self.k).sqrt() * t.powf(self.beta)
    }
}

fn dist2(x: [f64; 2], c: &[f64]) -> f64 {
    let a = x[0] - component(c, 0);
    let b = x[1] - component(c, 1);
    a * a + b * b
}

impl InitialData {
    fn validate(&self, dim: usize) -> Result<()> {
        let center_ok = |c: &Vec<f64>| c.is_empty() || c.len() == dim;
        let bad = |s: &str| Err(Error::InvalidModel(format!("initial data: {s}")));
        match self {
            InitialData::Barenblatt { t0, radius, center } => {
                if !(*t0 > 0.0 && *radius > 0.0) {
                    return bad("barenblatt needs t0 > 0 and radius > 0");
                }
                if !center_ok(center) {
                    return bad("center dimension");
                }
            }
            InitialData::SmoothBump { center, radius, amplitude, exponent } => {
                if !(*radius > 0.0 && *amplitude > 0.0 && *exponent > 0.0) {
                    return bad("smooth_bump needs positive radius, amplitude and exponent");
                }
                if !center_ok(center) {
                    return bad("center dimension");
                }
            }
            InitialData::Patch { center, radius, level, .. } => {
                if !(*radius > 0.0 && *level > 0.0) {
                    return bad("patch needs positive radius and level");
                }
                if !center_ok(center) {
                    return bad("center dimension");
                }
            }
            InitialData::AnnulusPlusCore | InitialData::CustomGrid { .. } => {}
        }
        Ok(())
    }

    /// Sub-quadratic growth constants `(gamma0, varsigma0)` for bump data: `p >= gamma0 d^{2 - varsigma0}`.
    pub fn growth_constants(&self) -> Option<(f64, f64)> {
        match self {
            InitialData::SmoothBump { radius, amplitude, exponent, .. } => {
                Some((amplitude * radius.powf(*exponent), 2.0 - exponent))
            }
            _ => None,
        }
    }

    fn load_custom(path: &PathBuf, grid: Grid) -> Result<Field> {
        let (f, _) = read_snapshot(path)?;
        grid.check_same(&f.grid)?;
        Ok(f)
    }

    /// Initial pressure on `grid` for finite `m`.
    pub fn pressure(&self, grid: Grid, m: f64) -> Result<Field> {
        let field = match self {
            InitialData::Barenblatt { t0, radius, center } => {
                let prof = BarenblattProfile::new(m, grid.dim, *t0, *radius);
                Field::from_fn(grid, 0.0, |x| prof.pressure(dist2(x, center), *t0))
            }
            InitialData::SmoothBump { center, radius, amplitude, exponent } => {
                Field::from_fn(grid, 0.0, |x| amplitude * (radius * radius - dist2(x, center)).max(0.0).powf(*exponent))
            }
            InitialData::Patch { .. } => {
                let rho = self.density(grid, Exponent::Finite(m))?;
                return pressure_from_density(&rho, Exponent::Finite(m));
            }
            InitialData::AnnulusPlusCore => Field::from_fn(grid, 0.0, |x| {
                let r = dist2(x, &[]).sqrt();
                if r <= 1.0 {
                    (0.5 + 0.5 * r * r).powf(m - 1.0)
                } else if r <= 1.5 {
                    1.0
                } else if r <= 2.0 {
                    4.0 - 2.0 * r
                } else {
                    0.0
                }
            }),
            InitialData::CustomGrid { path, quantity } => {
                let f = Self::load_custom(path, grid)?;
                return match quantity {
                    Quantity::Pressure => {
                        check_non_negative(&f)?;
                        Ok(f)
                    }
                    Quantity::Density => pressure_from_density(&f, Exponent::Finite(m)),
                };
            }
        };
        Ok(field)
    }

    /// Initial density on `grid`; for the limit problem this is a `[0, 1]` profile.
    pub fn density(&self, grid: Grid, m: Exponent) -> Result<Field> {
        match (self, m) {
            (InitialData::Patch { center, radius, level, mollify_cells }, _) => {
                let raw = Field::from_fn(grid, 0.0, |x| if dist2(x, center) < radius * radius { *level } else { 0.0 });
                if m.is_infinite() || *mollify_cells == 0 {
                    Ok(raw)
                } else {
                    Ok(ball_average(&raw, *mollify_cells as f64 * grid.dx))
                }
            }
            (InitialData::AnnulusPlusCore, Exponent::Infinite) => Ok(Field::from_fn(grid, 0.0, |x| {
                let r2 = dist2(x, &[]);
                if r2 <= 1.0 {
                    0.5 + 0.5 * r2
                } else if r2 < 4.0 {
                    1.0
                } else {
                    0.0
                }
            })),
            (InitialData::CustomGrid { path, quantity }, Exponent::Infinite) => {
                let f = Self::load_custom(path, grid)?;
                check_non_negative(&f)?;
                Ok(match quantity {
                    Quantity::Density => f.map(|v| v.min(1.0)),
                    Quantity::Pressure => f.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
                })
            }
            (_, Exponent::Infinite) => {
                // Limit of the finite-m densities: the indicator of the initial support.
                let p = self.pressure(grid, 2.0)?;
                Ok(p.map(|v| if v > 0.0 { 1.0 } else { 0.0 }))
            }
            (InitialData::CustomGrid { path, quantity: Quantity::Density }, Exponent::Finite(_)) => {
                let f = Self::load_custom(path, grid)?;
                check_non_negative(&f)?;
                Ok(f)
            }
            (_, Exponent::Finite(mf)) => density_from_pressure(&self.pressure(grid, mf)?, m),
        }
    }
}

/// Average over the Euclidean ball of radius `r` (cells whose centres lie within `r`).
fn ball_average(u: &Field, r: f64) -> Field {
    let g = u.grid;
    let rc = (r / g.dx).floor() as isize;
    let mut offsets = Vec::new();
    let jr = if g.dim == 2 { rc } else { 0 };
    for dj in -jr..=jr {
        for di in -rc..=rc {
            if ((di * di + dj * dj) as f64) * g.dx * g.dx <= r * r + 1e-12 {
                offsets.push((di, dj));
            }
        }
    }
    let n = g.n as isize;
    let mut out = Field::zeros(g, u.time);
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        let mut s = 0.0;
        for &(di, dj) in &offsets {
            let (a, b) = (i as isize + di, j as isize + dj);
            if a >= 0 && a < n && b >= 0 && b < n.max(1) && (g.dim == 2 || b == 0) {
                s += u.values[g.index(a as usize, b as usize)];
            }
        }
        out.values[k] = s / offsets.len() as f64;
    }
    out
}

fn check_non_negative(u: &Field) -> Result<()> {
    match u.values.iter().position(|&v| !(v >= 0.0)) {
        Some(cell) => Err(Error::NegativeValue { cell, value: u.values[cell] }),
        None => Ok(()),
    }
}

/// `p = m / (m - 1) * rho^(m - 1)`.
pub fn pressure_from_density(rho: &Field, m: Exponent) -> Result<Field> {
    let m = m.finite()?;
    check_non_negative(rho)?;
    let c = m / (m - 1.0);
    Ok(rho.map(|r| if r > 0.0 { c * r.powf(m - 1.0) } else { 0.0 }))
}

/// `rho = ((m - 1) / m * p)^(1 / (m - 1))`.
pub fn density_from_pressure(p: &Field, m: Exponent) -> Result<Field> {
    let m = m.finite()?;
    check_non_negative(p)?;
    let c = (m - 1.0) / m;
    let e = 1.0 / (m - 1.0);
    Ok(p.map(|v| if v > 0.0 { (c * v).powf(e) } else { 0.0 }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub m: Exponent,
    pub drift: Drift,
    pub source: Source,
    pub horizon: f64,
    pub domain: Domain,
    pub init: InitialData,
}

impl ModelSpec {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn with_m(&self, m: Exponent) -> Self {
        Self { m, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.m {
            Exponent::Finite(m) if !(m > 1.0 && m.is_finite()) => {
                return Err(Error::InvalidModel(format!("m = {m} must exceed 1")));
            }
            _ => {}
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidModel("horizon must be positive".into()));
        }
        let d = self.dim();
        if !(d == 1 || d == 2) || self.domain.hi.len() != d {
            return Err(Error::InvalidModel("domain must be 1- or 2-dimensional".into()));
        }
        if !(self.domain.volume() > 0.0) {
            return Err(Error::InvalidModel("domain has no volume".into()));
        }
        self.drift.validate(d)?;
        self.source.validate(d)?;
        self.init.validate(d)
    }

    /// Upper bound for `sup |b|` over the domain at time `t` (exact for the affine kinds).
    pub fn drift_bound(&self, t: f64) -> f64 {
        let d = self.dim();
        let mut best: f64 = 0.0;
        let corners = 1usize << d;
        for c in 0..corners {
            let mut x = [0.0; 2];
            for (a, xa) in x.iter_mut().enumerate().take(d) {
                *xa = if c >> a & 1 == 1 { self.domain.hi[a] } else { self.domain.lo[a] };
            }
            let b = self.drift.value(x, t);
            best = best.max(b[0].hypot(b[1]));
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDensity {
    pub space: usize,
    pub time: usize,
    pub pressure: usize,
}

impl Default for SampleDensity {
    fn default() -> Self {
        Self { space: 64, time: 8, pressure: 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuditOptions {
    pub sample: SampleDensity,
    /// Resolution used to evaluate the initial data.
    pub grid_cells: usize,
    pub p_max: Option<f64>,
    pub c_d: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { sample: SampleDensity::default(), grid_cells: 128, p_max: None, c_d: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `sup|b| + sup|Db| + sup|D^2 b| + sup|b_t|`.
    pub b_c21: f64,
    pub b_inf: f64,
    pub grad_b_inf: f64,
    pub div_b_inf: f64,
    /// `sup (|grad_x f| + |f_t|)`.
    pub f_c1: f64,
    pub f0_inf: f64,
    pub f_plus_inf: f64,
    pub f_inf: f64,
    pub fp_inf: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssumptionFlags {
    /// Finite norms.
    pub bounded: bool,
    /// `sigma > 0`.
    pub cond: bool,
    /// `b = 0`, `f = f(p) >= 0`, `f_p <= 0`: the alternative to `sigma > 0`.
    pub cond_prime: bool,
    pub h2: bool,
    /// `Delta p0 + div b + f(p0) >= 0` on the grid.
    pub r11: bool,
    /// `sigma > 2d sup|grad b|`.
    pub interior_ball_smallness: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Cond,
    CondPrime,
    Unsupported,
}

/// Paraboloid barrier `(C/2)(R(t)^2 - |x|^2)_+` with `R' = C R + |b|_inf`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub c: f64,
    pub r0: f64,
    pub b_inf: f64,
}

impl Barrier {
    pub fn radius(&self, t: f64) -> f64 {
        let e = (self.c * t).exp();
        e * self.r0 + self.b_inf / self.c * (e - 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub sigma: f64,
    pub sigma_tilde: f64,
    pub sup_fp: f64,
    pub norms: Norms,
    pub p_max: f64,
    pub c_d: f64,
    pub c0_ab: Option<f64>,
    pub regime: Regime,
    pub barrier: Barrier,
    pub satisfied: AssumptionFlags,
    pub min_r11: Option<f64>,
}

fn lattice(lo: f64, hi: f64, k: usize) -> impl Iterator<Item = f64> {
    let k = k.max(1);
    (0..=k).map(move |i| lo + (hi - lo) * i as f64 / k as f64)
}

fn finite_or(what: &'static str, v: f64, x: [f64; 2], t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation { what, x, t })
    }
}

/// Samples the standing assumptions on a vertex lattice of domain x [0, T] x [0, 1.5 p_max].
pub fn audit_assumptions(spec: &ModelSpec, opts: &AuditOptions) -> Result<AssumptionReport> {
    spec.validate()?;
    let d = spec.dim();
    let grid = spec.domain.grid(opts.grid_cells)?;
    let t_max = spec.horizon;

    let space_points: Vec<[f64; 2]> = {
        let xs: Vec<f64> = lattice(spec.domain.lo[0], spec.domain.hi[0], opts.sample.space).collect();
        if d == 1 {
            xs.iter().map(|&x| [x, 0.0]).collect()
        } else {
            let ys: Vec<f64> = lattice(spec.domain.lo[1], spec.domain.hi[1], opts.sample.space).collect();
            ys.iter().flat_map(|&y| xs.iter().map(move |&x| [x, y])).collect()
        }
    };
    let times: Vec<f64> = lattice(0.0, t_max, opts.sample.time).collect();

    // Initial pressure scale and positive growth rate at that scale.
    let p0 = match spec.m {
        Exponent::Finite(m) => Some(spec.init.pressure(grid, m)?),
        Exponent::Infinite => None,
    };
    let p0_sup = p0.as_ref().map(|p| p.max().max(0.0)).unwrap_or(0.0);
    let mut f_plus0: f64 = 0.0;
    let mut div_b_inf: f64 = 0.0;
    let mut b_inf: f64 = 0.0;
    for &x in &space_points {
        for &t in &times {
            for p in lattice(0.0, p0_sup, 4) {
                f_plus0 = f_plus0.max(finite_or("f", spec.source.value(x, t, p), x, t)?);
            }
            div_b_inf = div_b_inf.max(finite_or("div b", spec.drift.div(x, t, d), x, t)?.abs());
            let b = spec.drift.value(x, t);
            b_inf = b_inf.max(finite_or("b", b[0].hypot(b[1]), x, t)?);
        }
    }

    let c_bar = (1.0f64).max((div_b_inf + f_plus0) / d as f64);
    let rho0 = spec.init.density(grid, spec.m)?;
    let r0 = barrier_initial_radius(&rho0, p0.as_ref(), c_bar);
    let barrier = Barrier { c: c_bar, r0, b_inf };

    let p_max = match opts.p_max {
        Some(p) => p,
        None => match spec.m {
            Exponent::Finite(_) => p0_sup * (f_plus0 * t_max).exp(),
            Exponent::Infinite => 0.5 * c_bar * barrier.radius(t_max).powi(2),
        },
    };

    let mut sigma = f64::INFINITY;
    let mut sigma_tilde = f64::INFINITY;
    let mut sup_fp = f64::NEG_INFINITY;
    let mut n = Norms { div_b_inf, b_inf, ..Norms::default() };
    let mut b_c1: f64 = 0.0;
    let mut b_c2: f64 = 0.0;
    let mut b_t: f64 = 0.0;
    let mut f_depends_on_xt = false;
    let mut f_nonneg = true;
    for &x in &space_points {
        for &t in &times {
            let div = spec.drift.div(x, t, d);
            let j = spec.drift.jacobian(x, t, d);
            let gb = (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt();
            n.grad_b_inf = n.grad_b_inf.max(gb);
            b_c1 = b_c1.max(gb);
            b_c2 = b_c2.max(spec.drift.hessian_norm(x, t));
            let bt = spec.drift.time_derivative(x, t);
            b_t = b_t.max(bt[0].hypot(bt[1]));
            n.f0_inf = n.f0_inf.max(spec.source.value(x, t, 0.0).abs());
            for p in lattice(0.0, 1.5 * p_max, opts.sample.pressure) {
                let f = finite_or("f", spec.source.value(x, t, p), x, t)?;
                let fp = finite_or("f_p", spec.source.dp(x, t, p), x, t)?;
                let gx = spec.source.grad_x(x, t, p);
                let ft = spec.source.dt(x, t, p);
                let c1 = gx[0].hypot(gx[1]) + ft.abs();
                if c1 != 0.0 {
                    f_depends_on_xt = true;
                }
                if f < 0.0 {
                    f_nonneg = false;
                }
                n.f_c1 = n.f_c1.max(c1);
                n.f_plus_inf = n.f_plus_inf.max(f.max(0.0));
                n.f_inf = n.f_inf.max(f.abs());
                n.fp_inf = n.fp_inf.max(fp.abs());
                sup_fp = sup_fp.max(fp);
                sigma = sigma.min(div + f - fp * p);
                sigma_tilde = sigma_tilde.min(div + f);
            }
        }
    }
    n.b_c21 = b_inf + b_c1 + b_c2 + b_t;

    let bounded = [n.b_c21, n.f_c1, n.f0_inf, n.f_plus_inf].iter().all(|v| v.is_finite());
    let cond = sigma > 0.0;
    let cond_prime = spec.drift.is_zero() && !f_depends_on_xt && f_nonneg && sup_fp <= 0.0;
    let h2 = sigma_tilde > 0.0 && sup_fp <= 0.0;
    let (r11, min_r11) = match &p0 {
        Some(p) => {
            let q = r11_margin(spec, p);
            (q >= -1e-9 * (1.0 + p.max()), Some(q))
        }
        None => (false, None),
    };
    let interior_ball_smallness = sigma > 2.0 * d as f64 * n.grad_b_inf;
    let regime = if cond {
        Regime::Cond
    } else if cond_prime {
        Regime::CondPrime
    } else {
        Regime::Unsupported
    };
    let mut report = AssumptionReport {
        sigma,
        sigma_tilde,
        sup_fp,
        norms: n,
        p_max,
        c_d: opts.c_d,
        c0_ab: None,
        regime,
        barrier,
        satisfied: AssumptionFlags { bounded, cond, cond_prime, h2, r11, interior_ball_smallness },
        min_r11,
    };
    report.c0_ab = ab_constant(&report, p_max, opts.c_d).ok();
    Ok(report)
}

/// `min_x Delta_h p0 + div b(x, 0) + f(x, 0, p0)` over the grid.
fn r11_margin(spec: &ModelSpec, p0: &Field) -> f64 {
    let lap = laplacian(p0);
    let g = p0.grid;
    (0..g.len())
        .map(|k| {
            let x = g.center(k);
            lap.values[k] + spec.drift.div(x, 0.0, g.dim) + spec.source.value(x, 0.0, p0.values[k])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest `R` with `(C/2)(R^2 - |x|^2) >= p0(x)` on the initial support.
pub fn barrier_initial_radius(rho0: &Field, p0: Option<&Field>, c: f64) -> f64 {
    let g = rho0.grid;
    let mut r2: f64 = 0.0;
    for k in 0..g.len() {
        if rho0.values[k] > 0.0 {
            let x = g.center(k);
            let p = p0.map(|p| p.values[k]).unwrap_or(0.0);
            r2 = r2.max(x[0] * x[0] + x[1] * x[1] + 2.0 * p / c);
        }
    }
    r2.sqrt()
}

/// Constant of the Aronson-Benilan lower bound. Under the alternative condition
/// (`b = 0`, `f = f(p)`) the factor `1 + 1/sigma` is replaced by 2.
pub fn ab_constant(report: &AssumptionReport, p_max: f64, c_d: f64) -> Result<f64> {
    let sigma_factor = match report.regime {
        Regime::Cond => 1.0 + 1.0 / report.sigma,
        Regime::CondPrime => 2.0,
        Regime::Unsupported => {
            return Err(Error::UnsupportedRegime(format!(
                "sigma = {} <= 0 and the drift-free monotone-source alternative does not hold",
                report.sigma
            )))
        }
    };
    let n = &report.norms;
    Ok(c_d * sigma_factor * (1.0 + p_max) * (1.0 + n.fp_inf) * (1.0 + n.b_c21.powi(2) + n.f_c1.powi(2) + n.f0_inf))
}

/// Radius of the barrier ball containing the support at time `t`, for every `m`.
pub fn theoretical_support_radius(report: &AssumptionReport, t: f64) -> f64 {
    report.barrier.radius(t)
}
