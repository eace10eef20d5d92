//! Window statistics and their exact null tail probabilities.

pub mod special;
pub mod thresholds;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{Scheme, ScoreStream, ScoreValues, SegmentSpan};

pub use special::{
    binomial_log_tail, binomial_tail, gamma_upper_quantile, log_upper_regularized_gamma, normal_upper_quantile,
    regularized_gamma_cdf,
};
pub use thresholds::{
    aar_threshold, kgw_min_green, kgw_threshold, shortest_decidable_window, KgwThreshold, ThresholdEntry, ThresholdTable,
};

/// Largest value accepted for `u` before taking `log(1/(1-u))`.
pub const AAR_CLAMP: f64 = 1.0 - f64::EPSILON / 2.0;

/// KGW z-score of `green` green tokens in a window of `w`.
pub fn kgw_z(green: usize, w: usize, gamma: f64) -> Result<f64> {
    if w == 0 {
        return Err(Error::EmptyInput("kgw window"));
    }
    if green > w {
        return Err(Error::invalid(format!("green count {green} exceeds window {w}")));
    }
    Ok(kgw_z_unchecked(green, w, gamma))
}

#[inline]
pub(crate) fn kgw_z_unchecked(green: usize, w: usize, gamma: f64) -> f64 {
    let w = w as f64;
    (green as f64 - gamma * w) / (gamma * (1.0 - gamma) * w).sqrt()
}

/// Aar per-token score `log(1/(1-u))`, with `u` clamped below 1.
#[inline]
pub fn aar_token_score(u: f64) -> f64 {
    -(-u.min(AAR_CLAMP)).ln_1p()
}

/// `S = Σ log(1/(1-u))` over a window.
pub fn aar_sum(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("aar window"));
    }
    if values.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::invalid("aar values must lie in [0, 1]"));
    }
    Ok(values.iter().map(|&u| aar_token_score(u)).sum())
}

/// `1 - GammaCDF(S; shape = w, scale = 1)`.
pub fn aar_p_value(sum_stat: f64, w: usize) -> Result<f64> {
    aar_log_p_value(sum_stat, w).map(f64::exp)
}

pub fn aar_log_p_value(sum_stat: f64, w: usize) -> Result<f64> {
    if w == 0 {
        return Err(Error::EmptyInput("aar window"));
    }
    if sum_stat < 0.0 {
        return Err(Error::invalid(format!("aar sum must be non-negative, got {sum_stat}")));
    }
    log_upper_regularized_gamma(w as f64, sum_stat)
}

/// A window's raw statistic and its exact null tail probability.
///
/// `log_tail` is authoritative: the tail of a long, strongly watermarked
/// window underflows `f64` long before its logarithm does.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowStatistic {
    pub scheme: Scheme,
    /// z for KGW, `S` for Aar.
    pub raw: f64,
    pub window_len: usize,
    /// Natural log of the null probability of a statistic at least this extreme.
    pub log_tail: f64,
    /// Green count (KGW only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<usize>,
}

impl WindowStatistic {
    pub fn kgw(green: usize, w: usize, gamma: f64) -> Self {
        WindowStatistic {
            scheme: Scheme::Kgw,
            raw: kgw_z_unchecked(green, w, gamma),
            window_len: w,
            log_tail: binomial_log_tail(w as u64, gamma, green as u64),
            green: Some(green),
        }
    }

    pub fn aar(sum: f64, w: usize) -> Result<Self> {
        Ok(WindowStatistic {
            scheme: Scheme::Aar,
            raw: sum,
            window_len: w,
            log_tail: aar_log_p_value(sum, w)?,
            green: None,
        })
    }

    pub fn tail_prob(&self) -> f64 {
        self.log_tail.exp()
    }
}

/// Statistic over `span`, computed directly from the stream values.
pub fn window_statistic(stream: &ScoreStream, span: SegmentSpan, gamma: f64) -> Result<WindowStatistic> {
    if span.is_empty() {
        return Err(Error::EmptyInput("statistic window"));
    }
    span.check_within(stream.len())?;
    match stream.values() {
        ScoreValues::Green(v) => {
            let green = v[span.start..span.end].iter().filter(|&&g| g).count();
            Ok(WindowStatistic::kgw(green, span.len(), gamma))
        }
        ScoreValues::Uniform(v) => WindowStatistic::aar(aar_sum(&v[span.start..span.end])?, span.len()),
    }
}
