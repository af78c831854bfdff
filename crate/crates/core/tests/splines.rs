mod common;

use kanload::spline::{make_grid, refit_grid};
use proptest::prelude::*;

#[test]
fn basis_properties_over_degrees_and_grids() {
    let c = common::spline_properties();
    assert!(c.unity_err < 1e-9, "partition of unity off by {:e}", c.unity_err);
    assert_eq!(c.support_violations, 0);
    assert!(c.deriv_err < 1e-6, "derivative off by {:e}", c.deriv_err);
}

#[test]
fn recursion_and_row_agree() {
    let grid = make_grid(0.0, 1.0, 4, 3).unwrap();
    for s in 0..50 {
        let x = s as f64 / 49.0;
        let row = grid.basis_row(x).unwrap();
        for (i, b) in row.iter().enumerate() {
            assert!((grid.basis_value(i, x).unwrap() - b).abs() < 1e-14);
        }
    }
}

#[test]
fn refit_to_a_wider_grid_preserves_the_spline() {
    let old = make_grid(-1.0, 1.0, 5, 3).unwrap();
    let coeffs: Vec<f64> = (0..old.basis_count()).map(|i| (i as f64 * 0.7).sin()).collect();
    let new = make_grid(-1.0, 1.0, 10, 3).unwrap();
    let refit = refit_grid(&old, &coeffs, &new, 200).unwrap();
    for s in 0..=100 {
        let x = -1.0 + 2.0 * s as f64 / 100.0;
        let a = old.eval_spline(&coeffs, x).unwrap();
        let b = new.eval_spline(&refit, x).unwrap();
        assert!((a - b).abs() < 1e-9, "{x}: {a} vs {b}");
    }
}

proptest! {
    #[test]
    fn unity_holds_anywhere_in_the_domain(
        lo in -10.0f64..10.0,
        span in 0.1f64..20.0,
        g in 1usize..12,
        k in 0usize..4,
        u in 0.0f64..=1.0,
    ) {
        let grid = make_grid(lo, lo + span, g, k).unwrap();
        let x = lo + u * span;
        let row = grid.basis_row(x).unwrap();
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(row.iter().all(|b| *b >= -1e-15));
        prop_assert!(row.iter().filter(|b| **b != 0.0).count() <= k + 1);
    }

    #[test]
    fn spline_is_linear_in_coefficients(
        a in proptest::collection::vec(-5.0f64..5.0, 8),
        b in proptest::collection::vec(-5.0f64..5.0, 8),
        s in -3.0f64..3.0,
        x in -1.0f64..1.0,
    ) {
        let grid = make_grid(-1.0, 1.0, 5, 3).unwrap();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + s * q).collect();
        let lhs = grid.eval_spline(&mix, x).unwrap();
        let rhs = grid.eval_spline(&a, x).unwrap() + s * grid.eval_spline(&b, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }
}
