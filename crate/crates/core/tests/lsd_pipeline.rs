//! Gap probability -> spacing density pipeline and fits on exact curves.

use rmt_spacing::fitting::{fit_lambda, Tabulated, DEFAULT_TOLERANCE, DEFAULT_WINDOW};
use rmt_spacing::fredholm::{
    convergence_report, gap_curve, gap_to_lsd, pure_class_lsd, source_gap_curve, CurveSource, Grid,
};
use rmt_spacing::kernels::{lambda_big_to_rho, KernelSpec};

fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    assert!(n.is_multiple_of(2));
    let inner: f64 = (1..n).map(|i| if i % 2 == 1 { 4.0 } else { 2.0 } * values[i]).sum();
    h / 3.0 * (values[0] + inner + values[n])
}

#[test]
fn double_integration_recovers_the_sine_kernel_gap() {
    // E(s) = 1 - s + int_0^s (s - t) P(t) dt = 1 - s + s I1(s) - I2(s).
    let grid = Grid::uniform(4.0, 0.01).unwrap();
    let gap = gap_curve(&KernelSpec::SINE, &grid, 80).unwrap();
    let lsd = gap_to_lsd(&gap).unwrap();
    let h = 0.01;
    let s = grid.points();
    for k in (20..s.len()).step_by(20) {
        let p = &lsd.values[..=k];
        let i1 = simpson(p, h);
        let tp: Vec<f64> = p.iter().zip(s).map(|(v, t)| v * t).collect();
        let i2 = simpson(&tp, h);
        let e = 1.0 - s[k] + s[k] * i1 - i2;
        assert!((e - gap.values[k]).abs() < 1e-6, "s = {}: {e} vs {}", s[k], gap.values[k]);
    }
}

#[test]
fn crossover_density_invariants() {
    let grid = Grid::uniform(6.0, 0.01).unwrap();
    let source = CurveSource::Kernel {
        kernel: KernelSpec::dynamical(lambda_big_to_rho(0.5).unwrap()).unwrap(),
    };
    let lsd = gap_to_lsd(&source_gap_curve(&source, &grid, 60).unwrap()).unwrap();
    assert!((lsd.mass - 1.0).abs() < 1e-3, "mass {}", lsd.mass);
    assert!((lsd.mean - 1.0).abs() < 5e-3, "mean {}", lsd.mean);
    assert!(lsd.values[0].abs() < 1e-4);
    assert!(lsd.values.iter().all(|&p| p > -1e-8));
    assert!(lsd.derivative_agreement < 1e-5);
}

#[test]
fn pure_classes_are_normalized() {
    let grid = Grid::uniform(6.0, 0.01).unwrap();
    for beta in [1, 2, 4] {
        let lsd = pure_class_lsd(beta, &grid, 60).unwrap();
        assert!((lsd.mass - 1.0).abs() < 1e-3, "beta={beta} mass {}", lsd.mass);
        assert!((lsd.mean - 1.0).abs() < 5e-3, "beta={beta} mean {}", lsd.mean);
    }
}

#[test]
fn sine_kernel_converges_with_order() {
    let rows = convergence_report(&CurveSource::Kernel { kernel: KernelSpec::SINE }, &[1.0, 2.0], &[10, 20, 40]).unwrap();
    for s in [1.0, 2.0] {
        let shifts: Vec<f64> = rows.iter().filter(|r| r.s == s).map(|r| r.rel_shift).collect();
        assert!(shifts[1] <= shifts[0], "s={s}: {shifts:?}");
        assert!(shifts[1] < 1e-10, "s={s}: {shifts:?}");
    }
}

#[test]
fn fitted_lambda_is_stable_under_step_halving() {
    let source = CurveSource::Kernel {
        kernel: KernelSpec::dynamical(lambda_big_to_rho(1.0).unwrap()).unwrap(),
    };
    let fit_at = |ds: f64| {
        let grid = Grid::uniform(6.0, ds).unwrap();
        let lsd = gap_to_lsd(&source_gap_curve(&source, &grid, 40).unwrap()).unwrap();
        fit_lambda(&Tabulated::from_lsd(&lsd), DEFAULT_WINDOW, DEFAULT_TOLERANCE).unwrap().lambda_star
    };
    let (coarse, fine) = (fit_at(0.01), fit_at(0.005));
    assert!((coarse - fine).abs() <= 1e-3, "{coarse} vs {fine}");
}
