//! Exact squared Euclidean distance transform between cell centres
//! (Felzenszwalb and Huttenlocher, separable lower envelope of parabolas).

use crate::grid::Mask;

/// One-dimensional transform of `f` in place (`f` holds 0 on the set and +inf elsewhere on the first pass).
fn transform_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    let mut first = None;
    for (q, &fq) in f.iter().enumerate() {
        if fq.is_finite() {
            first = Some(q);
            break;
        }
    }
    let Some(q0) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = q0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in q0 + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared distance (in cells) from every cell centre to the nearest set cell; +inf if the mask is empty.
pub fn squared_distance_cells(mask: &Mask) -> Vec<f64> {
    let g = mask.grid;
    let n = g.n;
    let mut f: Vec<f64> = mask.bits.iter().map(|&b| if b { 0.0 } else { f64::INFINITY }).collect();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut buf = vec![0.0; n];
    let mut out = vec![0.0; n];
    let rows = if g.dim == 2 { n } else { 1 };
    for j in 0..rows {
        buf.copy_from_slice(&f[j * n..(j + 1) * n]);
        transform_1d(&buf, &mut out, &mut v, &mut z);
        f[j * n..(j + 1) * n].copy_from_slice(&out);
    }
    if g.dim == 2 {
        for i in 0..n {
            for j in 0..n {
                buf[j] = f[j * n + i];
            }
            transform_1d(&buf, &mut out, &mut v, &mut z);
            for j in 0..n {
                f[j * n + i] = out[j];
            }
        }
    }
    f
}

/// Squared distance (in cells) to the complement of `mask`, counting the cells just outside the grid as complement.
pub fn squared_distance_to_complement_cells(mask: &Mask) -> Vec<f64> {
    let g = mask.grid;
    let mut d = squared_distance_cells(&mask.complement());
    for (k, v) in d.iter_mut().enumerate() {
        let e = (g.edge_distance(k) + 1) as f64;
        *v = v.min(e * e);
    }
    d
}
