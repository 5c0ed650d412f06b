use freebound::geometry::hausdorff_distance;
use freebound::grid::{l1_distance, mass, Field, Mask};
use freebound::hele_shaw::{complementarity_solve, run_limit, transport_growth_step, LimitConfig, LimitState, PsorConfig};
use freebound::model::{Domain, Drift, Exponent, InitialData, ModelSpec, Source};
use freebound::pme::{run, run_from, stable_dt, DtPolicy, SolveConfig};
use proptest::prelude::*;

fn square(h: f64) -> Domain {
    Domain { lo: vec![-h, -h], hi: vec![h, h] }
}

fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> InitialData {
    InitialData::SmoothBump { center, radius, amplitude, exponent: 1.0 }
}

fn finite(m: f64, drift: Drift, source: Source, horizon: f64, domain: Domain, init: InitialData) -> ModelSpec {
    ModelSpec { m: Exponent::Finite(m), drift, source, horizon, domain, init }
}

fn limit(source: Source, horizon: f64, domain: Domain, init: InitialData) -> ModelSpec {
    ModelSpec { m: Exponent::Infinite, drift: Drift::None, source, horizon, domain, init }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn l1_contraction_without_drift_or_source(
        m in 1.5f64..12.0,
        c1 in -0.5f64..0.5,
        c2 in -0.5f64..0.5,
        a1 in 0.2f64..1.0,
        a2 in 0.2f64..1.0,
    ) {
        let domain = Domain { lo: vec![-2.0], hi: vec![2.0] };
        let s1 = finite(m, Drift::None, Source::None, 0.1, domain.clone(), bump(vec![c1], 0.6, a1));
        let s2 = finite(m, Drift::None, Source::None, 0.1, domain.clone(), bump(vec![c2], 0.5, a2));
        let g = domain.grid(128).unwrap();
        let (r1, r2) = (s1.init.density(g, s1.m).unwrap(), s2.init.density(g, s2.m).unwrap());
        let base = SolveConfig { cells: 128, ..Default::default() };
        let dt = stable_dt(&r1, &s1, 0.0, &base).unwrap().min(stable_dt(&r2, &s2, 0.0, &base).unwrap());
        let cfg = SolveConfig { dt_policy: DtPolicy::Fixed(dt), ..base };
        let d0 = l1_distance(&r1, &r2).unwrap();
        let t1 = run_from(&s1, r1, &cfg).unwrap();
        let t2 = run_from(&s2, r2, &cfg).unwrap();
        let d1 = l1_distance(&t1.final_snapshot().rho, &t2.final_snapshot().rho).unwrap();
        prop_assert!(d1 <= d0 * (1.0 + 1e-10), "{d1} > {d0}");
    }
}

fn drifting_pair(m: f64, t: f64) -> (freebound::pme::Trajectory, freebound::pme::Trajectory) {
    let with = finite(m, Drift::Constant { velocity: vec![0.5, 0.0] }, Source::None, t, square(2.0), bump(vec![], 0.5, 0.5));
    let without = ModelSpec { drift: Drift::None, ..with.clone() };
    let cfg = SolveConfig { cells: 128, ..Default::default() };
    (run(&with, &cfg).unwrap(), run(&without, &cfg).unwrap())
}

#[test]
fn constant_drift_is_a_galilean_shift() {
    let t = 0.25;
    let (a, b) = drifting_pair(10.0, t);
    let (pa, pb) = (&a.final_snapshot().p, &b.final_snapshot().p);
    let g = pa.grid;
    let sa = pa.support(1e-6 * pa.max());
    // Drift-free solution evaluated at x + b t.
    let shifted = Mask::from_fn(g, |x| g.locate([x[0] + 0.5 * t, x[1]]).is_some_and(|k| pb.values[k] > 1e-6 * pb.max()));
    let d = hausdorff_distance(&sa, &shifted).unwrap();
    assert!(d <= 2.0 * g.dx, "{} cells", d / g.dx);
}

#[test]
fn constant_drift_moves_the_centroid_by_minus_bt() {
    let t = 0.25;
    let (a, b) = drifting_pair(2.0, t);
    let centroid = |rho: &Field| {
        let g = rho.grid;
        let total: f64 = rho.values.iter().sum();
        rho.values.iter().enumerate().map(|(k, v)| v * g.center(k)[0]).sum::<f64>() / total
    };
    let shift = centroid(&a.final_snapshot().rho) - centroid(&b.final_snapshot().rho);
    assert!((shift + 0.5 * t).abs() <= 1e-6, "{shift}");
}

#[test]
fn unit_source_grows_mass_exponentially() {
    let s = finite(3.0, Drift::None, Source::Constant { value: 1.0 }, 0.3, square(1.5), bump(vec![], 0.5, 0.4));
    let tr = run(&s, &SolveConfig { cells: 96, max_dt: 1e-3, ..Default::default() }).unwrap();
    let m0 = tr.mass_series[0].1;
    let (t, m1) = *tr.mass_series.last().unwrap();
    let rel = (m1 / m0 - t.exp()).abs() / t.exp();
    assert!(rel <= 1e-3, "relative deviation {rel:e}");
}

#[test]
fn rotation_conserves_mass() {
    let s = finite(
        10.0,
        Drift::Rotation { omega: 1.0, center: vec![] },
        Source::None,
        0.3,
        square(1.5),
        bump(vec![0.4, 0.0], 0.3, 0.3),
    );
    let tr = run(&s, &SolveConfig { cells: 96, ..Default::default() }).unwrap();
    let m0 = tr.mass_series[0].1;
    let worst = tr.mass_series.iter().map(|(_, m)| (m - m0).abs() / m0).fold(0.0, f64::max);
    assert!(worst <= 1e-10, "{worst:e}");
    // Only subnormal values are flushed with a zero floor.
    assert!(tr.clamped_mass <= 1e-300);
}

#[test]
fn limit_transport_conserves_mass_under_rotation() {
    let s = ModelSpec {
        drift: Drift::Rotation { omega: 1.0, center: vec![] },
        ..limit(Source::None, 0.1, square(1.5), InitialData::Patch { center: vec![0.3, 0.0], radius: 0.4, level: 1.0, mollify_cells: 0 })
    };
    let g = s.domain.grid(96).unwrap();
    let rho = s.init.density(g, Exponent::Infinite).unwrap();
    let st = LimitState { p: Field::zeros(g, 0.0), rho: rho.clone(), time: 0.0 };
    let out = transport_growth_step(&st, &s, 0.5 * g.dx).unwrap();
    assert!((mass(&out) - mass(&rho)).abs() <= 1e-10 * mass(&rho));
}

#[test]
fn projection_widens_an_oversaturated_interval() {
    let s = limit(Source::None, 0.1, Domain { lo: vec![-2.0], hi: vec![2.0] }, InitialData::AnnulusPlusCore);
    let g = s.domain.grid(200).unwrap();
    let (a, c) = (0.5, 0.2);
    let star = Field::from_fn(g, 0.0, |x| if x[0].abs() < a { 1.0 + c } else { 0.0 });
    let cfg = PsorConfig { tol_residual: 1e-12, max_sweeps: 200_000, ..Default::default() };
    let (st, rep) = complementarity_solve(&star, &s, 0.0, &cfg, 1e-3).unwrap();
    assert!(rep.converged);
    assert!((mass(&st.rho) - mass(&star)).abs() <= 1e-8);
    assert!(st.rho.max() <= 1.0 + 1e-10);
    // Same mass as an indicator of [-a(1+c), a(1+c)], up to one partially filled cell per side.
    let full = st.rho.values.iter().filter(|&&v| v >= 1.0 - 1e-9).count() as f64 * g.dx;
    assert!((full - 2.0 * a * (1.0 + c)).abs() <= 2.0 * g.dx, "{full}");
    assert!(st.rho.values.iter().all(|&v| v >= -1e-15));
}

#[test]
fn saturated_disk_pressure_is_the_torsion_profile() {
    let radius = 0.5;
    let s = limit(
        Source::Constant { value: 1.0 },
        1.0,
        square(1.0),
        InitialData::Patch { center: vec![], radius, level: 1.0, mollify_cells: 0 },
    );
    let cfg = LimitConfig { cells: 256, save_times: vec![0.0], ..Default::default() };
    let tr = run_limit(&s, &cfg).unwrap();
    let p = &tr.snapshots[0].p_avg;
    let g = p.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..g.len() {
        let x = g.center(k);
        let exact = ((radius * radius - x[0] * x[0] - x[1] * x[1]) / 4.0).max(0.0);
        num += (p.values[k] - exact).powi(2);
        den += exact * exact;
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 0.05, "relative L2 error {rel}");
}

#[test]
fn annulus_limit_pressure_vanishes_on_the_core() {
    let s = limit(Source::Logistic { a: 2.0 }, 0.05, square(2.5), InitialData::AnnulusPlusCore);
    // Next to the shell the core is almost saturated, so the inner front starts fast; resolve t = 0+
    // with short steps.
    let cfg = LimitConfig { cells: 128, max_dt: 1e-4, save_times: vec![0.0, 0.001], ..Default::default() };
    let tr = run_limit(&s, &cfg).unwrap();
    for snap in &tr.snapshots {
        let g = snap.p_avg.grid;
        let thr = 1e-6 * snap.p_avg.max();
        let mut core_positive = 0;
        let mut shell_positive = 0;
        for k in 0..g.len() {
            let r = g.center(k)[0].hypot(g.center(k)[1]);
            let on = snap.p_avg.values[k] > thr;
            if r < 1.0 - 2.0 * g.dx && on {
                core_positive += 1;
            }
            if (1.2..1.8).contains(&r) && on {
                shell_positive += 1;
            }
        }
        assert_eq!(core_positive, 0, "t={}", snap.time);
        assert!(shell_positive > 0);
    }
}

#[test]
fn saturated_patch_grows_at_unit_rate() {
    let s = limit(
        Source::Constant { value: 1.0 },
        0.2,
        square(1.5),
        InitialData::Patch { center: vec![], radius: 0.4, level: 1.0, mollify_cells: 0 },
    );
    let tr = run_limit(&s, &LimitConfig { cells: 128, save_times: vec![0.0, 0.2], ..Default::default() }).unwrap();
    let (t0, m0) = tr.mass_series[0];
    let (t1, m1) = *tr.mass_series.last().unwrap();
    let rate = (m1 / m0).ln() / (t1 - t0);
    assert!((rate - 1.0).abs() <= 0.05, "growth rate {rate}");
}
