use serde::{Deserialize, Serialize};

/// Least-squares fit of `log y = log c + slope log x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub prefactor: f64,
    pub r2: f64,
    pub points: usize,
    /// Fewer than four points or `r2 < 0.8`.
    pub inconclusive: bool,
}

pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_R2: f64 = 0.8;

/// Fits over the pairs with both coordinates positive and finite; `None` with fewer than two.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Option<PowerFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len();
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy <= 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Some(PowerFit {
        slope,
        prefactor: intercept.exp(),
        r2,
        points: n,
        inconclusive: n < MIN_FIT_POINTS || r2 < MIN_R2,
    })
}

/// Geometric ladder of `count` values from `lo` to `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    let q = (hi / lo).powf(1.0 / (count - 1) as f64);
    (0..count).map(|i| lo * q.powi(i as i32)).collect()
}

/// Two-column CSV for a log-log plot.
pub fn xy_csv(xs: &[f64], ys: &[f64], header: (&str, &str)) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (x, y) in xs.iter().zip(ys) {
        s.push_str(&format!("{x},{y}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = geometric_ladder(0.01, 1.0, 6);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        let f = power_law_fit(&xs, &ys).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.prefactor - 3.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12 && !f.inconclusive);
    }

    #[test]
    fn too_few_points() {
        assert!(power_law_fit(&[1.0], &[1.0]).is_none());
        let f = power_law_fit(&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!(f.inconclusive);
    }
}
