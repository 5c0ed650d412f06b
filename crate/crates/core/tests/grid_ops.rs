use freebound::grid::{divergence, gradient, l1_distance, l1_norm, laplacian, mass, Field, FaceField, Grid};
use freebound::model::{density_from_pressure, pressure_from_density, Exponent};
use proptest::prelude::*;

fn grid2(n: usize) -> Grid {
    Grid::new(2, n, &[0.0, 0.0], &[1.0, 1.0]).unwrap()
}

fn field(g: Grid, values: Vec<f64>) -> Field {
    Field::from_values(g, values, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_and_divergence_are_adjoint(
        u in prop::collection::vec(-1.0f64..1.0, 256),
        fx in prop::collection::vec(-1.0f64..1.0, 17 * 16),
        fy in prop::collection::vec(-1.0f64..1.0, 17 * 16),
    ) {
        let g = grid2(16);
        let u = field(g, u);
        let mut f = FaceField::zeros(g);
        let n = g.n;
        for j in 0..n {
            for k in 1..n {
                f.x[j * (n + 1) + k] = fx[j * (n + 1) + k];
            }
        }
        for k in 1..n {
            for i in 0..n {
                f.y[k * n + i] = fy[k * n + i];
            }
        }
        let lhs = gradient(&u).dot(&f).unwrap() + u.dot(&divergence(&f)).unwrap();
        prop_assert!(lhs.abs() <= 1e-10, "adjointness defect {lhs:e}");
    }

    #[test]
    fn l1_distance_is_norm_of_difference(
        a in prop::collection::vec(-2.0f64..2.0, 256),
        b in prop::collection::vec(-2.0f64..2.0, 256),
    ) {
        let g = grid2(16);
        let diff = field(g, a.iter().zip(&b).map(|(x, y)| x - y).collect());
        let (a, b) = (field(g, a), field(g, b));
        let d = l1_distance(&a, &b).unwrap();
        prop_assert!((d - l1_norm(&diff)).abs() <= 1e-12 * (1.0 + d));
    }

    #[test]
    fn pressure_density_round_trip(m in 1.05f64..40.0, rho in prop::collection::vec(1e-4f64..3.0, 256)) {
        let g = grid2(16);
        let rho = field(g, rho);
        let back = density_from_pressure(&pressure_from_density(&rho, Exponent::Finite(m)).unwrap(), Exponent::Finite(m)).unwrap();
        for (x, y) in rho.values.iter().zip(&back.values) {
            prop_assert!((x - y).abs() <= 1e-12 * x);
        }
    }
}

#[test]
fn indicator_mass_counts_cells() {
    let g = grid2(16);
    let mut u = Field::zeros(g, 0.0);
    for k in [3, 40, 41, 200] {
        u.values[k] = 1.0;
    }
    assert!((mass(&u) - 4.0 * g.dx * g.dx).abs() < 1e-15);
}

#[test]
fn laplacian_second_order_on_sine() {
    let err = |n: usize| {
        let g = Grid::new(1, n, &[0.0], &[1.0]).unwrap();
        let pi = std::f64::consts::PI;
        let u = Field::from_fn(g, 0.0, |x| (pi * x[0]).sin());
        let lap = laplacian(&u);
        (2..n - 2)
            .map(|k| (lap.values[k] + pi * pi * (pi * g.center(k)[0]).sin()).abs())
            .fold(0.0f64, f64::max)
    };
    let (coarse, fine) = (err(64), err(128));
    let order = (coarse / fine).log2();
    assert!(order >= 1.9, "observed order {order}");
}
