//! Closed-form crossover surmise against sampled 2x2 matrices.

use std::f64::consts::PI;

use rmt_spacing::stats::{chi_square_equiprobable, invert_cdf, ks_distance, mean_and_std_error};
use rmt_spacing::surmise::{crossover_surmise_cdf, surmise_mc_oracle, wigner_surmise_pure_cdf};

const SEED: u64 = 7;

#[test]
fn chi_square_on_equiprobable_bins_at_lambda_one() {
    let sample = surmise_mc_oracle(1.0, 1_000_000, SEED).unwrap();
    let chi = chi_square_equiprobable(&sample.spacings, |p| invert_cdf(|s| crossover_surmise_cdf(s, 1.0), p), 50).unwrap();
    let per_dof = chi.per_dof();
    assert!((0.5..=2.0).contains(&per_dof), "chi2/dof = {per_dof}");
}

#[test]
fn ks_distance_is_small_across_the_crossover() {
    for lambda in [0.01, 0.1, 0.5, 3.0] {
        let sample = surmise_mc_oracle(lambda, 200_000, SEED).unwrap();
        let d = ks_distance(&sample.spacings, |s| crossover_surmise_cdf(s, lambda)).unwrap();
        // 1.63 / sqrt(n) is the 1% KS critical value.
        assert!(d < 1.63 / (200_000f64).sqrt(), "lambda={lambda}: D = {d}");
    }
}

#[test]
fn goe_raw_spacing_mean_is_sqrt_pi() {
    let sample = surmise_mc_oracle(0.0, 1_000_000, SEED).unwrap();
    let (mean, se) = mean_and_std_error(&sample.raw);
    assert!((mean - PI.sqrt()).abs() < 4.0 * se, "mean {mean}, se {se}");
}

#[test]
fn limits_match_the_pure_surmises() {
    for s in [0.2, 0.7, 1.3, 2.5] {
        let goe = wigner_surmise_pure_cdf(1, s).unwrap();
        let gue = wigner_surmise_pure_cdf(2, s).unwrap();
        assert!((crossover_surmise_cdf(s, 1e-6) - goe).abs() < 1e-4, "s={s}");
        assert!((crossover_surmise_cdf(s, 1e3) - gue).abs() < 1e-4, "s={s}");
    }
}

#[test]
fn same_seed_same_sample() {
    let a = surmise_mc_oracle(0.3, 10_000, 99).unwrap();
    let b = surmise_mc_oracle(0.3, 10_000, 99).unwrap();
    assert_eq!(a.raw, b.raw);
}
