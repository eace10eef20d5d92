//! Oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

pub fn binom_row(n: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for k in 1..=n {
        let prev = row[(k - 1) as usize].clone();
        row.push(prev * BigUint::from(n - k + 1) / BigUint::from(k));
    }
    row
}

pub fn pow(b: u64, e: u64) -> BigUint {
    BigUint::from(b).pow(e as u32)
}

/// Exact upper tail of Binomial(n, a/b) at k as numerator over `b^n`.
pub fn exact_tail(n: u64, a: u64, b: u64, k: u64, row: &[BigUint]) -> BigUint {
    let mut num = BigUint::zero();
    for j in k..=n {
        num += &row[j as usize] * pow(a, j) * pow(b - a, n - j);
    }
    num
}

pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let q = if shift >= 0 { (num << shift as usize) / den } else { num / (den << (-shift) as usize) };
    q.to_f64().unwrap() * 2f64.powi(-shift as i32)
}

pub fn log_tail_by_summation(n: u64, p: f64, k: u64) -> f64 {
    let terms: Vec<f64> = (k..=n)
        .map(|j| {
            let (j, nf) = (j as f64, n as f64);
            ln_gamma(nf + 1.0) - ln_gamma(j + 1.0) - ln_gamma(nf - j + 1.0) + j * p.ln() + (nf - j) * (1.0 - p).ln()
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// P(s, x) by composite Gauss-Legendre over the Gamma(s, 1) density.
pub fn gamma_cdf_quadrature(s: f64, x: f64, rule: &[(f64, f64)]) -> f64 {
    let sd = s.sqrt();
    let lo = (s - 45.0 * sd - 45.0).max(0.0);
    let hi = x.min(s + 45.0 * sd + 45.0);
    if hi <= lo {
        return if x <= lo { 0.0 } else { 1.0 };
    }
    let norm = ln_gamma(s);
    let density = |t: f64| if t <= 0.0 { 0.0 } else { ((s - 1.0) * t.ln() - t - norm).exp() };
    let panels = ((hi - lo) / (0.02 * sd.max(1.0))).ceil().max(200.0) as usize;
    let h = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        total += rule.iter().map(|(xi, wi)| wi * density(mid + 0.5 * h * xi)).sum::<f64>() * 0.5 * h;
    }
    total
}

/// Kolmogorov-Smirnov statistic of a sample against Uniform(0, 1).
pub fn ks_uniform(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i as f64 + 1.0) / n - x))
        .fold(0.0, f64::max)
}


/// Window lengths in `1..=max_w` whose minimal green count disagrees with
/// the big-integer oracle (`w <= 60`) or with log-space summation.
pub fn min_green_mismatches(max_w: usize) -> Vec<usize> {
    let million = BigUint::from(1_000_000u32);
    let ln_alpha = 1e-6f64.ln();
    (1..=max_w)
        .filter(|&w| {
            let got = seeker_core::stats::kgw_min_green(w, 0.5, 1e-6).map(|k| k as u64);
            let n = w as u64;
            if w <= 60 {
                let row = binom_row(n);
                let den = pow(2, n);
                // tail < 1e-6 exactly when 10^6 * num < den.
                let expected = (0..=n).find(|&k| &million * exact_tail(n, 1, 2, k, &row) < den);
                got != expected
            } else {
                match got {
                    Some(k) => !(log_tail_by_summation(n, 0.5, k) < ln_alpha && log_tail_by_summation(n, 0.5, k - 1) >= ln_alpha),
                    None => true,
                }
            }
        })
        .collect()
}

/// Largest absolute gap between `regularized_gamma_cdf` and quadrature on a
/// 50-point grid: ten shapes log-spaced over [1, 1000], five points each.
pub fn gamma_grid_max_error() -> (f64, usize) {
    let rule = gauss_legendre(16);
    let mut worst = 0.0f64;
    let mut points = 0;
    for i in 0..10 {
        let s = 1000f64.powf(i as f64 / 9.0);
        for c in [-3.0, -1.0, 0.0, 1.5, 4.0] {
            let x = (s + c * s.sqrt()).max(0.05);
            let got = seeker_core::stats::regularized_gamma_cdf(s, x).unwrap();
            worst = worst.max((got - gamma_cdf_quadrature(s, x, &rule)).abs());
            points += 1;
        }
    }
    (worst, points)
}

/// KS statistic of `n` window p-values cut from null Aar streams, with the
/// asymptotic critical value at level 0.01.
pub fn null_aar_ks(n: usize, seed: u64) -> (f64, f64) {
    use seeker_core::stats::window_statistic;
    use seeker_core::stream::sample_null_stream;
    use seeker_core::{Scheme, SchemeParams, SegmentSpan};
    let params = SchemeParams::null(Scheme::Aar, 0.5).unwrap();
    let lengths = [1usize, 7, 50, 200];
    let per_stream = 1000;
    let mut p_values = Vec::with_capacity(n);
    let mut doc = 0u64;
    while p_values.len() < n {
        let w = lengths[doc as usize % lengths.len()];
        let stream = sample_null_stream(&params, w * per_stream, seeker_core::rng::derive_seed(seed, doc)).unwrap();
        for j in 0..per_stream.min(n - p_values.len()) {
            let span = SegmentSpan::new(j * w, (j + 1) * w).unwrap();
            p_values.push(window_statistic(&stream, span, 0.5).unwrap().log_tail.exp());
        }
        doc += 1;
    }
    (ks_uniform(p_values), 1.6276 / (n as f64).sqrt())
}
