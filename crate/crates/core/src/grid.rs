//! Uniform Cartesian grids, cell fields, masks and the discrete operators
//! shared by the solvers and diagnostics.
//!
//! Cells are indexed row-major: `idx = j * n + i` with `i` along the first
//! axis. In one dimension `j` is always zero. Values outside the grid are
//! treated as zero ("ghost" cells).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

pub const MIN_CELLS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub dx: f64,
    pub origin: [f64; 2],
}

impl Grid {
    /// Grid covering the box `[lo, hi]` with `n` cells per axis. The box must be a cube.
    pub fn new(dim: usize, n: usize, lo: &[f64], hi: &[f64]) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < MIN_CELLS {
            return Err(Error::InvalidGrid(format!("{n} cells per axis, need at least {MIN_CELLS}")));
        }
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidGrid("domain bounds do not match dimension".into()));
        }
        let extent = hi[0] - lo[0];
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::InvalidGrid("domain has non-positive extent".into()));
        }
        for a in 1..dim {
            let e = hi[a] - lo[a];
            if (e - extent).abs() > 1e-12 * extent {
                return Err(Error::InvalidGrid("domain must have equal extent on all axes".into()));
            }
        }
        let mut origin = [0.0; 2];
        origin[..dim].copy_from_slice(lo);
        Ok(Self { dim, n, dx: extent / n as f64, origin })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn extent(&self) -> f64 {
        self.dx * self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim as i32)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        let x = self.origin[0] + (i as f64 + 0.5) * self.dx;
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + (j as f64 + 0.5) * self.dx]
        }
    }

    /// Cell containing `x`, if inside the grid.
    pub fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let fi = ((x[0] - self.origin[0]) / self.dx).floor();
        if !(fi >= 0.0 && fi < self.n as f64) {
            return None;
        }
        if self.dim == 1 {
            return Some(fi as usize);
        }
        let fj = ((x[1] - self.origin[1]) / self.dx).floor();
        if !(fj >= 0.0 && fj < self.n as f64) {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// Up to 2d face neighbours that lie inside the grid.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.coords(idx);
        let n = self.n;
        let dim = self.dim;
        let cand = [
            (i > 0).then(|| idx - 1),
            (i + 1 < n).then(|| idx + 1),
            (dim == 2 && j > 0).then(|| idx - n),
            (dim == 2 && j + 1 < n).then(|| idx + n),
        ];
        cand.into_iter().flatten()
    }

    /// Number of cells to the nearest grid edge (0 for edge cells).
    pub fn edge_distance(&self, idx: usize) -> usize {
        let (i, j) = self.coords(idx);
        let di = i.min(self.n - 1 - i);
        if self.dim == 1 {
            di
        } else {
            di.min(j.min(self.n - 1 - j))
        }
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(grid: Grid, time: f64) -> Self {
        Self { grid, values: vec![0.0; grid.len()], time }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn(grid: Grid, time: f64, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center(k))).collect();
        Self { grid, values, time }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect(), time: self.time }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cells with value strictly above `threshold`.
    pub fn support(&self, threshold: f64) -> Mask {
        Mask { grid: self.grid, bits: self.values.iter().map(|&v| v > threshold).collect() }
    }

    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }
}

pub fn l1_norm(u: &Field) -> f64 {
    u.values.iter().map(|v| v.abs()).sum::<f64>() * u.grid.cell_volume()
}

pub fn linf_norm(u: &Field) -> f64 {
    u.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn mass(u: &Field) -> f64 {
    u.values.iter().sum::<f64>() * u.grid.cell_volume()
}

pub fn l1_distance(u: &Field, v: &Field) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    let s: f64 = u.values.iter().zip(&v.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(s * u.grid.cell_volume())
}

/// Compact (2d+1)-point Laplacian with zero ghost cells.
pub fn laplacian(u: &Field) -> Field {
    let g = u.grid;
    let n = g.n;
    let inv = 1.0 / (g.dx * g.dx);
    let v = &u.values;
    let mut out = vec![0.0; g.len()];
    for (k, o) in out.iter_mut().enumerate() {
        let (i, j) = g.coords(k);
        let c = v[k];
        let w = if i > 0 { v[k - 1] } else { 0.0 };
        let e = if i + 1 < n { v[k + 1] } else { 0.0 };
        let mut acc = (e - c) - (c - w);
        if g.dim == 2 {
            let s = if j > 0 { v[k - n] } else { 0.0 };
            let nn = if j + 1 < n { v[k + n] } else { 0.0 };
            acc += (nn - c) - (c - s);
        }
        *o = acc * inv;
    }
    Field { grid: g, values: out, time: u.time }
}

/// Values on cell faces. Axis-0 faces: `n + 1` per row, index `j * (n + 1) + k`,
/// face `k` sitting between cells `k - 1` and `k`. Axis-1 faces: index `k * n + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: Grid) -> Self {
        let rows = if grid.dim == 2 { grid.n } else { 1 };
        let y = if grid.dim == 2 { vec![0.0; (grid.n + 1) * grid.n] } else { Vec::new() };
        Self { grid, x: vec![0.0; (grid.n + 1) * rows], y }
    }

    /// Samples `f` at face midpoints (component 0 on axis-0 faces, component 1 on axis-1 faces).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut ff = Self::zeros(grid);
        let n = grid.n;
        let rows = if grid.dim == 2 { n } else { 1 };
        for j in 0..rows {
            for k in 0..=n {
                let x0 = grid.origin[0] + k as f64 * grid.dx;
                let y0 = if grid.dim == 2 { grid.origin[1] + (j as f64 + 0.5) * grid.dx } else { 0.0 };
                ff.x[j * (n + 1) + k] = f([x0, y0])[0];
            }
        }
        if grid.dim == 2 {
            for k in 0..=n {
                for i in 0..n {
                    let x0 = grid.origin[0] + (i as f64 + 0.5) * grid.dx;
                    let y0 = grid.origin[1] + k as f64 * grid.dx;
                    ff.y[k * n + i] = f([x0, y0])[1];
                }
            }
        }
        ff
    }

    pub fn dot(&self, other: &FaceField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let sx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let sy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        Ok((sx + sy) * self.grid.cell_volume())
    }
}

/// Face differences `(u_k - u_{k-1}) / dx`, with zero ghost values.
pub fn gradient(u: &Field) -> FaceField {
    let g = u.grid;
    let n = g.n;
    let mut ff = FaceField::zeros(g);
    let at = |i: isize, j: usize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            u.values[j * n + i as usize]
        }
    };
    let rows = if g.dim == 2 { n } else { 1 };
    for j in 0..rows {
        for k in 0..=n {
            ff.x[j * (n + 1) + k] = (at(k as isize, j) - at(k as isize - 1, j)) / g.dx;
        }
    }
    if g.dim == 2 {
        for k in 0..=n {
            for i in 0..n {
                let hi = if k < n { u.values[k * n + i] } else { 0.0 };
                let lo = if k > 0 { u.values[(k - 1) * n + i] } else { 0.0 };
                ff.y[k * n + i] = (hi - lo) / g.dx;
            }
        }
    }
    ff
}

/// Cellwise flux balance `sum_axes (F_{k+1} - F_k) / dx`; the negative adjoint of [`gradient`].
pub fn divergence(f: &FaceField) -> Field {
    let g = f.grid;
    let n = g.n;
    let mut out = vec![0.0; g.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let (i, j) = g.coords(idx);
        let mut acc = f.x[j * (n + 1) + i + 1] - f.x[j * (n + 1) + i];
        if g.dim == 2 {
            acc += f.y[(j + 1) * n + i] - f.y[j * n + i];
        }
        *o = acc / g.dx;
    }
    Field { grid: g, values: out, time: 0.0 }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub grid: Grid,
    pub bits: Vec<bool>,
}

impl Eq for Grid {}

impl Mask {
    pub fn empty(grid: Grid) -> Self {
        Self { grid, bits: vec![false; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> bool) -> Self {
        Self { grid, bits: (0..grid.len()).map(|k| f(grid.center(k))).collect() }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> Mask {
        Mask { grid: self.grid, bits: self.bits.iter().map(|b| !b).collect() }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    fn zip(&self, other: &Mask, op: impl Fn(bool, bool) -> bool) -> Mask {
        debug_assert_eq!(self.grid, other.grid);
        Mask { grid: self.grid, bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| op(a, b)).collect() }
    }

    pub fn to_rle(&self) -> MaskRle {
        let mut runs = Vec::new();
        let mut k = 0;
        while k < self.bits.len() {
            if self.bits[k] {
                let start = k;
                while k < self.bits.len() && self.bits[k] {
                    k += 1;
                }
                runs.push([start, k - start]);
            } else {
                k += 1;
            }
        }
        MaskRle { d: self.grid.dim, cells_per_axis: self.grid.n, dx: self.grid.dx, origin: self.grid.origin, runs }
    }

    pub fn from_rle(rle: &MaskRle) -> Result<Self> {
        let grid = Grid { dim: rle.d, n: rle.cells_per_axis, dx: rle.dx, origin: rle.origin };
        let mut m = Mask::empty(grid);
        for &[start, len] in &rle.runs {
            if start + len > m.bits.len() {
                return Err(Error::GridMismatch("run exceeds cell count".into()));
            }
            m.bits[start..start + len].fill(true);
        }
        Ok(m)
    }
}

/// Run-length encoding of the set cells of a mask: `[start, length]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskRle {
    pub d: usize,
    pub cells_per_axis: usize,
    pub dx: f64,
    pub origin: [f64; 2],
    pub runs: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    d: usize,
    cells_per_axis: usize,
    dx: f64,
    origin: Vec<f64>,
    time_stamp: f64,
    name: String,
}

/// Writes a JSON header line followed by little-endian f64 cell values.
pub fn write_snapshot(path: &Path, field: &Field, name: &str) -> Result<()> {
    let g = field.grid;
    let header = SnapshotHeader {
        d: g.dim,
        cells_per_axis: g.n,
        dx: g.dx,
        origin: g.origin[..g.dim].to_vec(),
        time_stamp: field.time,
        name: name.to_string(),
    };
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut line = serde_json::to_string(&header)?;
    line.push('\n');
    w.write_all(line.as_bytes()).map_err(io_err(path))?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_snapshot(path: &Path) -> Result<(Field, String)> {
    let bad = |message: String| Error::Snapshot { path: path.to_path_buf(), message };
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line).map_err(io_err(path))?;
    let h: SnapshotHeader = serde_json::from_str(line.trim_end()).map_err(|e| bad(e.to_string()))?;
    if h.origin.len() != h.d {
        return Err(bad("origin length does not match d".into()));
    }
    let mut origin = [0.0; 2];
    origin[..h.d].copy_from_slice(&h.origin);
    let grid = Grid { dim: h.d, n: h.cells_per_axis, dx: h.dx, origin };
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != grid.len() * 8 {
        return Err(bad(format!("expected {} payload bytes, found {}", grid.len() * 8, bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((Field { grid, values, time: h.time_stamp }, h.name))
}
