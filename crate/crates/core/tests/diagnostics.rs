use freebound::diagnostics::{
    ab_check, auto_radii, compare_pair, covering_dimension, oscillation_propagation, ConvergenceOptions, Frame,
    FrameSeries, SupportRule,
};
use freebound::geometry::frontier_from_support;
use freebound::grid::{Field, Grid, Mask};
use freebound::model::{density_from_pressure, Domain, Drift, Exponent, InitialData, ModelSpec, Source};

/// Source-type pressure `a(t) (R(t)^2 - |x|^2)_+` with `a = 1 / (2 (d(m-1)+2) t)` and
/// `R = t^(1/(d(m-1)+2))`, derived from `p_t = (m-1) p Delta p + |grad p|^2`.
fn source_type(g: Grid, m: f64, t: f64) -> Field {
    let d = g.dim as f64;
    let q = d * (m - 1.0) + 2.0;
    let a = 1.0 / (2.0 * q * t);
    let r2 = t.powf(2.0 / q);
    let mut p = Field::from_fn(g, 0.0, |x| a * (r2 - x[0] * x[0] - x[1] * x[1]).max(0.0));
    p.time = t;
    p
}

fn series(m: f64, times: &[f64], n: usize) -> FrameSeries {
    let domain = Domain { lo: vec![-2.0, -2.0], hi: vec![2.0, 2.0] };
    let g = domain.grid(n).unwrap();
    let spec = ModelSpec {
        m: Exponent::Finite(m),
        drift: Drift::None,
        source: Source::None,
        horizon: *times.last().unwrap(),
        domain,
        init: InitialData::Barenblatt { t0: times[0], radius: 1.0, center: vec![] },
    };
    let frames = times
        .iter()
        .map(|&t| {
            let p = source_type(g, m, t);
            let rho = density_from_pressure(&p, Exponent::Finite(m)).unwrap();
            Frame::new(t, rho, p, SupportRule::Pressure)
        })
        .collect();
    FrameSeries { spec, frames }
}

#[test]
fn source_type_solution_meets_the_ab_floor_exactly() {
    for m in [2.0, 10.0] {
        let times = [0.5, 1.0, 2.0];
        let s = series(m, &times, 128);
        let kappa = 2.0 / (2.0 * (m - 1.0) + 2.0);
        let report = ab_check(&s, 0.0, 0.0, false).unwrap();
        assert!(report.pass);
        assert_eq!(report.rows.len(), times.len());
        for row in &report.rows {
            let min_q = row.min_q.unwrap();
            assert!((min_q + kappa / row.time).abs() <= 1e-8 * kappa / row.time, "m={m}: {min_q}");
            assert!((row.floor + 1.0 / ((m - 1.0) * row.time)).abs() <= 1e-12);
        }
        // Delta p < 0 inside, so a zero floor from t = 0 is violated by kappa / t.
        let imp = ab_check(&s, 0.0, 0.0, true).unwrap();
        for row in &imp.rows {
            assert!((row.margin.unwrap() + kappa / row.time).abs() <= 1e-8, "{row:?}");
            assert_eq!(row.pass, kappa / row.time <= row.tolerance);
        }
        assert_eq!(imp.pass, imp.rows.iter().all(|r| r.pass));
    }
}

#[test]
fn ab_check_skips_frames_before_eta0() {
    let s = series(3.0, &[0.5, 1.0, 2.0], 64);
    let report = ab_check(&s, 0.9, 0.0, false).unwrap();
    assert_eq!(report.rows.iter().map(|r| r.time).collect::<Vec<_>>(), vec![1.0, 2.0]);
}

#[test]
fn covering_dimension_of_a_segment_and_a_filled_square() {
    let g = Grid::new(2, 256, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let bar = frontier_from_support(Mask::from_fn(g, |x| x[0].abs() < 0.8 && x[1].abs() < g.dx), 0.0);
    let est = covering_dimension(&bar, &auto_radii(&bar, 6), None).unwrap();
    let d = est.dimension.unwrap();
    assert!((d - 1.0).abs() <= 0.15, "segment {d}");
    assert!(est.monotone);

    // Every cell of a checkerboard is a boundary cell, so the band fills the square.
    let board = frontier_from_support(
        Mask::from_fn(g, |x| {
            let (i, j) = (((x[0] + 1.0) / g.dx) as i64, ((x[1] + 1.0) / g.dx) as i64);
            x[0].abs() < 0.9 && x[1].abs() < 0.9 && (i + j) % 2 == 0
        }),
        0.0,
    );
    let radii: Vec<f64> = [3.0, 4.0, 6.0, 8.0, 12.0].iter().map(|c| c * g.dx).collect();
    let d = covering_dimension(&board, &radii, None).unwrap().dimension.unwrap();
    assert!((d - 2.0).abs() <= 0.2, "square {d}");
}

#[test]
fn covering_dimension_refuses_bad_radii() {
    let g = Grid::new(2, 128, &[-1.0, -1.0], &[1.0, 1.0]).unwrap();
    let disk = frontier_from_support(Mask::from_fn(g, |x| x[0].hypot(x[1]) < 0.5), 0.0);
    assert!(covering_dimension(&disk, &[g.dx, 4.0 * g.dx, 6.0 * g.dx, 8.0 * g.dx], None).is_err());
    assert!(covering_dimension(&disk, &[4.0 * g.dx, 6.0 * g.dx, 8.0 * g.dx], None).is_err());
}

#[test]
fn oscillation_of_a_steep_profile_scales_linearly() {
    let s = series(10.0, &[0.5, 1.0, 1.5], 128);
    let dx = s.grid().unwrap().dx;
    let radii: Vec<f64> = [1.0, 2.0, 4.0, 8.0].iter().map(|c| c * dx).collect();
    let report = oscillation_propagation(&s, &radii).unwrap();
    assert!(report.pass);
    assert!(report.c.unwrap() <= report.c_limit);
    for row in &report.rows {
        let slope = row.fit.unwrap().slope;
        assert!(slope >= 0.9, "t={}: exponent {slope}", row.time);
    }
}

#[test]
fn a_run_compared_with_itself_is_at_distance_zero() {
    let s = series(4.0, &[0.5, 1.0, 1.5, 2.0], 96);
    let opts = ConvergenceOptions { eta0: 0.0, time_weight: None, slack_radius: None };
    let pair = compare_pair(&s, &s, &opts).unwrap();
    assert_eq!(pair.l1_pressure, 0.0);
    for row in &pair.per_time {
        assert_eq!(row.hausdorff, Some(0.0));
        assert_eq!(row.a_from_b, Some(0.0));
        assert_eq!(row.b_from_a, Some(0.0));
    }
    assert_eq!(pair.spacetime.unwrap().distance, 0.0);
    assert_eq!(pair.containment_a_in_b, Some(0));
}

#[test]
fn nested_supports_give_one_sided_distances() {
    let small = series(4.0, &[0.5, 1.0], 96);
    let mut large = small.clone();
    for f in &mut large.frames {
        f.support = freebound::geometry::dilate(&f.support, 6.0 * f.p.grid.dx);
    }
    let opts = ConvergenceOptions { eta0: 0.0, time_weight: None, slack_radius: None };
    let pair = compare_pair(&small, &large, &opts).unwrap();
    let dx = small.grid().unwrap().dx;
    for row in &pair.per_time {
        assert_eq!(row.a_from_b, Some(0.0));
        assert!((row.b_from_a.unwrap() - 6.0 * dx).abs() <= dx, "{:?}", row.b_from_a);
    }
    assert_eq!(pair.containment_a_in_b, Some(0));
}
