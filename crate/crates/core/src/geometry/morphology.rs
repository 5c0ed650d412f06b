//! Euclidean-ball dilation/erosion of masks and running max/min of fields.

use super::edt::{squared_distance_cells, squared_distance_to_complement_cells};
use crate::grid::{Field, Grid, Mask};

/// Squared radius in cells, with a small allowance so that exact lattice distances are included.
fn radius_cells_sq(g: Grid, r: f64) -> f64 {
    let rc = r / g.dx;
    rc * rc * (1.0 + 1e-9) + 1e-9
}

/// Cells within distance `r` of the mask.
pub fn dilate(mask: &Mask, r: f64) -> Mask {
    let r2 = radius_cells_sq(mask.grid, r.max(0.0));
    let d = squared_distance_cells(mask);
    Mask { grid: mask.grid, bits: d.iter().map(|&v| v <= r2).collect() }
}

/// Cells farther than `r` from the complement (cells outside the grid count as complement).
pub fn erode(mask: &Mask, r: f64) -> Mask {
    let r2 = radius_cells_sq(mask.grid, r.max(0.0));
    let d = squared_distance_to_complement_cells(mask);
    Mask { grid: mask.grid, bits: mask.bits.iter().zip(&d).map(|(&b, &v)| b && v > r2).collect() }
}

/// Range-maximum table over one row.
struct SparseMax {
    levels: Vec<Vec<f64>>,
}

impl SparseMax {
    fn new(row: &[f64]) -> Self {
        let mut levels = vec![row.to_vec()];
        let mut span = 1;
        while 2 * span <= row.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=row.len() - 2 * span).map(|i| prev[i].max(prev[i + span])).collect();
            levels.push(next);
            span *= 2;
        }
        Self { levels }
    }

    /// Max over `[lo, hi]` (inclusive, in range).
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let len = hi - lo + 1;
        let lvl = (usize::BITS - 1 - len.leading_zeros()) as usize;
        let span = 1 << lvl;
        self.levels[lvl][lo].max(self.levels[lvl][hi + 1 - span])
    }
}

/// `sup_{|y - x| <= r} u(y)` over cell centres inside the grid.
pub fn sup_convolve(u: &Field, r: f64) -> Field {
    let g = u.grid;
    let n = g.n;
    let r2 = radius_cells_sq(g, r.max(0.0));
    let rc = r2.sqrt().floor() as isize;
    let rows = if g.dim == 2 { n } else { 1 };
    let tables: Vec<SparseMax> = (0..rows).map(|j| SparseMax::new(&u.values[j * n..(j + 1) * n])).collect();
    let half: Vec<(isize, isize)> = if g.dim == 2 {
        (-rc..=rc).map(|dj| (dj, ((r2 - (dj * dj) as f64).max(0.0)).sqrt().floor() as isize)).collect()
    } else {
        vec![(0, rc)]
    };
    let mut out = vec![0.0; g.len()];
    for j in 0..rows {
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            for &(dj, w) in &half {
                let jj = j as isize + dj;
                if jj < 0 || jj >= rows as isize {
                    continue;
                }
                let lo = i as isize - w;
                let hi = i as isize + w;
                let lo = lo.max(0) as usize;
                let hi = hi.min(n as isize - 1) as usize;
                best = best.max(tables[jj as usize].query(lo, hi));
            }
            out[j * n + i] = best;
        }
    }
    Field { grid: g, values: out, time: u.time }
}

/// `inf_{|y - x| <= r} u(y)`, defined as `-sup_convolve(-u, r)`.
pub fn inf_convolve(u: &Field, r: f64) -> Field {
    let neg = u.map(|v| -v);
    sup_convolve(&neg, r).map(|v| -v)
}
