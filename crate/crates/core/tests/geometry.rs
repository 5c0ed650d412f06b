use freebound::geometry::{
    dilate, directed_hausdorff, erode, extract_frontier, flow_map_set, frontier_from_support, hausdorff_distance,
    inf_convolve, integrate_streamline, spacetime_frontier_distance, sup_convolve,
};
use freebound::grid::{Field, Grid, Mask};
use freebound::model::{BarenblattProfile, Domain, Drift, Exponent, InitialData, ModelSpec, Source};
use proptest::prelude::*;

fn grid(n: usize, h: f64) -> Grid {
    Grid::new(2, n, &[-h, -h], &[h, h]).unwrap()
}

fn disk(g: Grid, c: [f64; 2], r: f64) -> Mask {
    Mask::from_fn(g, |x| (x[0] - c[0]).hypot(x[1] - c[1]) < r)
}

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

fn blob() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5, 0.05f64..0.4), 1..4)
}

fn union(g: Grid, disks: &[(f64, f64, f64)]) -> Mask {
    Mask::from_fn(g, |x| disks.iter().any(|&(a, b, r)| (x[0] - a).hypot(x[1] - b) < r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn hausdorff_is_a_metric(a in blob(), b in blob(), c in blob()) {
        let g = grid(48, 1.0);
        let (a, b, c) = (union(g, &a), union(g, &b), union(g, &c));
        let ab = hausdorff_distance(&a, &b).unwrap();
        let ba = hausdorff_distance(&b, &a).unwrap();
        let bc = hausdorff_distance(&b, &c).unwrap();
        let ac = hausdorff_distance(&a, &c).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(hausdorff_distance(&a, &a).unwrap(), 0.0);
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(ab, directed_hausdorff(&a, &b).unwrap().max(directed_hausdorff(&b, &a).unwrap()));
    }

    #[test]
    fn erosion_undoes_dilation_from_inside(a in blob(), r_cells in 0.0f64..4.0) {
        let g = grid(64, 1.5);
        let a = union(g, &a);
        let r = r_cells * g.dx;
        let closed = erode(&dilate(&a, r), r);
        prop_assert!(a.is_subset_of(&closed));
        prop_assert!(erode(&a, r).is_subset_of(&a));
        prop_assert!(a.is_subset_of(&dilate(&a, r)));
    }

    #[test]
    fn inf_is_negated_sup(values in prop::collection::vec(-1.0f64..1.0, 400), r_cells in 0.0f64..5.0) {
        let g = grid(20, 1.0);
        let u = Field::from_values(g, values, 0.0).unwrap();
        let r = r_cells * g.dx;
        let lhs = inf_convolve(&u, r);
        let rhs = sup_convolve(&u.map(|v| -v), r).map(|v| -v);
        prop_assert_eq!(lhs.values, rhs.values);
    }
}

#[test]
fn hausdorff_of_shifted_and_nested_disks() {
    let g = grid(200, 3.0);
    let d = hausdorff_distance(&disk(g, [0.0, 0.0], 1.0), &disk(g, [0.5, 0.0], 1.0)).unwrap();
    assert!((d - 0.5).abs() <= g.dx, "{d}");
    let d = hausdorff_distance(&disk(g, [0.0, 0.0], 1.0), &disk(g, [0.0, 0.0], 2.0)).unwrap();
    assert!((d - 1.0).abs() <= g.dx, "{d}");
}

#[test]
fn dilated_disk_is_larger_disk() {
    let g = grid(128, 2.0);
    let got = dilate(&disk(g, [0.0, 0.0], 0.6), 0.3);
    let want = disk(g, [0.0, 0.0], 0.9);
    assert!(hausdorff_distance(&got, &want).unwrap() <= g.dx);
}

#[test]
fn rotation_streamline_stays_on_circle() {
    let s = spec(Drift::Rotation { omega: 1.0, center: vec![] });
    let period = 2.0 * std::f64::consts::PI;
    let tr = integrate_streamline([0.7, 0.2], 0.0, (0.0, period), &s, 4.0 / 128.0);
    let r0 = 0.7f64.hypot(0.2);
    let worst = tr.samples.iter().map(|(_, x)| (x[0].hypot(x[1]) - r0).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-8, "radial drift {worst:e}");
    let end = tr.samples.last().unwrap().1;
    assert!((end[0] - 0.7).abs() < 1e-8 && (end[1] - 0.2).abs() < 1e-8);
}

#[test]
fn constant_drift_translates_masks() {
    let g = grid(128, 2.0);
    let s = spec(Drift::Constant { velocity: vec![0.5, -0.25] });
    let pushed = flow_map_set(&disk(g, [0.0, 0.0], 0.5), 0.0, 1.0, &s);
    let want = dilate(&disk(g, [-0.5, 0.25], 0.5), g.dx);
    let d = hausdorff_distance(&pushed, &want).unwrap();
    assert!(d <= g.dx, "{} cells", d / g.dx);
}

#[test]
fn rotation_keeps_centered_disk() {
    let g = grid(128, 2.0);
    let s = spec(Drift::Rotation { omega: 1.0, center: vec![] });
    let a = disk(g, [0.0, 0.0], 0.8);
    let pushed = flow_map_set(&a, 0.0, 1.3, &s);
    // The push-forward carries a declared one-cell dilation.
    let d = hausdorff_distance(&pushed, &dilate(&a, g.dx)).unwrap();
    assert!(d <= g.dx, "{} cells", d / g.dx);
}

#[test]
fn cone_profile_support_and_distances() {
    let g = Grid::new(1, 256, &[-2.0], &[2.0]).unwrap();
    let p = Field::from_fn(g, 0.0, |x| (1.0 - x[0].abs()).max(0.0));
    let rec = extract_frontier(&p, None);
    let want = Mask::from_fn(g, |x| x[0].abs() < 1.0);
    assert!(hausdorff_distance(&rec.support, &want).unwrap() <= g.dx);
    for k in 0..g.len() {
        let x = g.center(k)[0];
        assert!((rec.dist_to_support.values[k] - (x.abs() - 1.0).max(0.0)).abs() <= g.dx + 1e-12);
    }
}

#[test]
fn barenblatt_support_insensitive_to_threshold() {
    let g = grid(200, 2.0);
    let prof = BarenblattProfile::new(3.0, 2, 1.0, 1.0);
    let p = Field::from_fn(g, 1.0, |x| prof.pressure(x[0] * x[0] + x[1] * x[1], 1.0));
    let m = p.max();
    let a = extract_frontier(&p, Some(1e-8 * m)).support;
    let b = extract_frontier(&p, Some(1e-6 * m)).support;
    assert!(hausdorff_distance(&a, &b).unwrap() <= 2.0 * g.dx);
}

#[test]
fn frontier_band_is_within_one_cell_of_the_edge() {
    let g = grid(96, 1.5);
    let rec = frontier_from_support(disk(g, [0.1, -0.2], 0.7), 0.0);
    let outer = dilate(&rec.support, g.dx);
    let inner = erode(&rec.support, g.dx);
    assert!(rec.boundary.is_subset_of(&outer.difference(&inner)));
    assert!(!rec.boundary.is_empty());
}

#[test]
fn spacetime_distance_of_a_time_shift() {
    let g = grid(128, 2.0);
    let times: Vec<f64> = (0..8).map(|k| 0.1 * k as f64).collect();
    let growing = |shift: f64| -> Vec<_> {
        times.iter().map(|&t| frontier_from_support(disk(g, [0.0, 0.0], 0.4 + 0.5 * (t - shift).max(0.0)), t)).collect()
    };
    let a = growing(0.0);
    let b = growing(0.1);
    let w = 1.0;
    let d = spacetime_frontier_distance(&a, &b, Some(w)).unwrap();
    let bound = (w * 0.1f64).max(0.5 * 0.1) + g.dx;
    assert!(d.distance <= bound + 1e-12, "{} > {bound}", d.distance);
    assert_eq!(spacetime_frontier_distance(&a, &a, Some(w)).unwrap().distance, 0.0);
}
