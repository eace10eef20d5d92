//! Independent oracles for the statistics kernels.

mod common;

use common::*;
use seeker_core::stats::{binomial_tail, regularized_gamma_cdf};

#[test]
fn binomial_tail_matches_big_integer_enumeration() {
    for (a, b) in [(1u64, 2u64), (1, 4), (3, 10)] {
        let gamma = a as f64 / b as f64;
        for n in 1..=60u64 {
            let row = binom_row(n);
            let den = pow(b, n);
            for k in 0..=n + 1 {
                let expected = if k > n { 0.0 } else { ratio_to_f64(&exact_tail(n, a, b, k, &row), &den) };
                let got = binomial_tail(n, gamma, k);
                if expected == 0.0 {
                    assert_eq!(got, 0.0, "n={n} k={k}");
                } else {
                    let rel = ((got - expected) / expected).abs();
                    assert!(rel < 1e-12, "gamma={gamma} n={n} k={k}: {got:e} vs {expected:e} (rel {rel:e})");
                }
            }
        }
    }
}

#[test]
fn min_green_matches_oracles_up_to_400() {
    assert_eq!(min_green_mismatches(400), Vec::<usize>::new());
}

#[test]
fn gamma_cdf_matches_quadrature_on_a_grid() {
    let (worst, points) = gamma_grid_max_error();
    assert_eq!(points, 50);
    assert!(worst < 1e-10, "max abs error {worst:e}");
}

#[test]
fn gamma_cdf_is_monotone_in_x() {
    for s in [1.0, 2.5, 20.0, 150.0, 999.0] {
        let mut last = 0.0;
        for j in 0..200 {
            let p = regularized_gamma_cdf(s, s * 3.0 * j as f64 / 199.0).unwrap();
            assert!(p >= last, "not monotone at s={s} step {j}");
            last = p;
        }
    }
}

#[test]
fn null_aar_p_values_are_uniform() {
    let (d, critical) = null_aar_ks(100_000, 2024);
    assert!(d < critical, "KS D = {d} >= {critical}");
}
