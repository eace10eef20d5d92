//! Special functions behind the window tail probabilities.
//!
//! Everything that can underflow is computed in log space. The saddle-point
//! forms (`stirlerr`, `bd0`) follow Loader's construction so binomial and
//! gamma densities keep full relative precision for windows of any length.

use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_ITER: usize = 100_000;
const FPMIN: f64 = 1e-300;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma(x + 1.0) - x.ln();
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + a.ln()
}

/// Error of Stirling's formula: `ln Γ(n+1) - [(n+1/2) ln n - n + ln √(2π)]`.
pub(crate) fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let ln_fact = if n.fract() == 0.0 {
            // n! is exact in f64 up to 22!.
            (1..=n as u64).map(|i| i as f64).product::<f64>().ln()
        } else {
            ln_gamma(n + 1.0)
        };
        return ln_fact - (n + 0.5) * n.ln() + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x/m) + m - x`, accurate when `x ≈ m`.
pub(crate) fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        let v2 = v * v;
        for j in 1..1000 {
            ej *= v2;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`.
pub fn binomial_log_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if k == 0 {
        return n as f64 * (-p).ln_1p();
    }
    if k == n {
        return n as f64 * p.ln();
    }
    let (nf, kf) = (n as f64, k as f64);
    let lc = stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln P(X ≥ k)` for `X ~ Binomial(n, p)`, summed exactly term by term.
///
/// Above the mean the upper tail is summed directly; below it the complement
/// of the (smaller) lower tail is used, so no branch suffers cancellation.
pub fn binomial_log_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > n {
        return f64::NEG_INFINITY;
    }
    let odds = p / (1.0 - p);
    if k as f64 > n as f64 * p {
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in k..n {
            term *= (n - j) as f64 / (j + 1) as f64 * odds;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        binomial_log_pmf(n, p, k) + sum.ln()
    } else {
        let top = k - 1;
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in (1..=top).rev() {
            term *= j as f64 / (n - j + 1) as f64 / odds;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        let lower = (binomial_log_pmf(n, p, top) + sum.ln()).exp();
        (-lower).ln_1p()
    }
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`.
pub fn binomial_tail(n: u64, p: f64, k: u64) -> f64 {
    binomial_log_tail(n, p, k).exp()
}

/// `ln(x^s e^{-x} / Γ(s))`, the common prefactor of both gamma expansions.
fn gamma_log_prefactor(s: f64, x: f64) -> f64 {
    -bd0(s, x) + 0.5 * (s / (2.0 * PI)).ln() - stirlerr(s)
}

/// Lower series: `P(s, x) = prefactor · Σ x^n / (s (s+1) … (s+n))`.
pub(crate) fn lower_gamma_series(s: f64, x: f64) -> Result<f64> {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * f64::EPSILON {
            return Ok((gamma_log_prefactor(s, x) + sum.ln()).exp());
        }
    }
    Err(Error::NoConvergence("incomplete gamma series"))
}

/// Continued fraction (modified Lentz) for `ln Q(s, x)`.
pub(crate) fn log_upper_gamma_fraction(s: f64, x: f64) -> Result<f64> {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / if b.abs() < FPMIN { FPMIN } else { b };
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < f64::EPSILON {
            return Ok(gamma_log_prefactor(s, x) + h.ln());
        }
    }
    Err(Error::NoConvergence("incomplete gamma continued fraction"))
}

fn check_gamma_args(s: f64, x: f64) -> Result<()> {
    if !s.is_finite() || x.is_nan() {
        return Err(Error::NonFinite("regularized gamma"));
    }
    if s <= 0.0 {
        return Err(Error::invalid(format!("gamma shape must be positive, got {s}")));
    }
    if x < 0.0 {
        return Err(Error::invalid(format!("gamma argument must be non-negative, got {x}")));
    }
    Ok(())
}

/// `(P(s, x), ln Q(s, x))` using the series below `s + 1` and the continued
/// fraction above it.
pub fn regularized_gamma_pair(s: f64, x: f64) -> Result<(f64, f64)> {
    check_gamma_args(s, x)?;
    if x == 0.0 {
        return Ok((0.0, 0.0));
    }
    if x.is_infinite() {
        return Ok((1.0, f64::NEG_INFINITY));
    }
    if x < s + 1.0 {
        let p = lower_gamma_series(s, x)?;
        Ok((p, (-p).ln_1p()))
    } else {
        let lq = log_upper_gamma_fraction(s, x)?;
        Ok((-lq.exp_m1(), lq))
    }
}

/// Regularized lower incomplete gamma `P(s, x)`, the CDF of Gamma(s, 1).
pub fn regularized_gamma_cdf(s: f64, x: f64) -> Result<f64> {
    regularized_gamma_pair(s, x).map(|(p, _)| p)
}

/// `ln Q(s, x) = ln(1 - P(s, x))`.
pub fn log_upper_regularized_gamma(s: f64, x: f64) -> Result<f64> {
    regularized_gamma_pair(s, x).map(|(_, lq)| lq)
}

/// Smallest `x` with `Q(s, x) ≤ target`: the Gamma(s, 1) upper quantile.
pub fn gamma_upper_quantile(s: f64, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("tail target must lie in (0, 1), got {target}")));
    }
    let ln_target = target.ln();
    let f = |x: f64| log_upper_regularized_gamma(s, x).map(|lq| lq - ln_target);

    let mut lo = 0.0;
    let mut hi = s + 10.0 * s.sqrt() + 50.0;
    while f(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let fx = f(x)?;
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // Newton step on ln Q: d/dx ln Q = -x^(s-1) e^-x / (Γ(s) Q).
        let lq = fx + ln_target;
        let slope = -(gamma_log_prefactor(s, x) - x.ln() - lq).exp();
        let mut next = x - fx / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) || hi - lo <= 1e-15 * hi {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence("gamma quantile"))
}

/// `Φ⁻¹(1 - alpha)` for the standard normal.
pub fn normal_upper_quantile(alpha: f64) -> f64 {
    let standard = Normal::standard();
    -standard.inverse_cdf(alpha)
}
