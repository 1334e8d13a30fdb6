use rmt_spacing_web::{exact_values, fit_values, grid_points, surmise_values, MAX_DEMO_M};

#[test]
fn curves_share_the_grid() {
    let n = grid_points(5.0, 0.01).unwrap().len();
    assert_eq!(n, 501);
    assert_eq!(surmise_values(0.3, 5.0, 0.01).unwrap().len(), n);
    assert_eq!(exact_values(0.3, 40, 5.0, 0.01).unwrap().len(), n);
}

#[test]
fn exact_curve_has_unit_mass() {
    let p = exact_values(1.0, 40, 5.0, 0.01).unwrap();
    let mass: f64 = p.windows(2).map(|w| 0.005 * (w[0] + w[1])).sum();
    assert!((mass - 1.0).abs() < 1e-3, "{mass}");
}

#[test]
fn fit_at_lambda_one_is_close_to_one() {
    let fit = fit_values(1.0, 60, 6.0, 0.01).unwrap();
    assert!((fit[0] - 0.9613).abs() < 3e-3, "{fit:?}");
}

#[test]
fn rejects_bad_input() {
    assert!(surmise_values(-1.0, 5.0, 0.01).is_err());
    assert!(exact_values(1.0, MAX_DEMO_M + 1, 5.0, 0.01).is_err());
    assert!(exact_values(1.0, 40, 5.0, 0.05).is_err());
}
