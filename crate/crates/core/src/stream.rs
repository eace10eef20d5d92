//! Score streams and the generative models behind them.
//!
//! A [`ScoreStream`] holds the per-token watermark evidence of one document:
//! green/red flags for KGW, or the keyed uniform value `u_t(y_t)` for Aar.
//! Null streams model ordinary text; watermarked values are drawn from a
//! shifted distribution and spliced into a null host with [`embed_segments`].

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, labels};
use crate::stats::aar_token_score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Kgw,
    Aar,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Kgw => "kgw",
            Scheme::Aar => "aar",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kgw" => Ok(Scheme::Kgw),
            "aar" => Ok(Scheme::Aar),
            other => Err(Error::invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_ALPHA: f64 = 1e-6;

/// Statistical parameters of a watermark scheme.
///
/// `gamma1` is only meaningful for KGW and `aar_strength` only for Aar; the
/// other field is carried along untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeParams {
    pub scheme: Scheme,
    /// Green fraction of the vocabulary.
    pub gamma: f64,
    /// Green-token rate inside watermarked text.
    pub gamma1: f64,
    /// Shift `s` of the watermarked `Beta(1 + s, 1)` distribution of `u`.
    pub aar_strength: f64,
    /// Target in-window false-positive rate.
    pub alpha: f64,
}

impl SchemeParams {
    pub fn kgw(gamma: f64, gamma1: f64) -> Result<Self> {
        let p = SchemeParams {
            scheme: Scheme::Kgw,
            gamma,
            gamma1,
            aar_strength: 0.0,
            alpha: DEFAULT_ALPHA,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn aar(aar_strength: f64) -> Result<Self> {
        let p = SchemeParams {
            scheme: Scheme::Aar,
            gamma: DEFAULT_GAMMA,
            gamma1: 1.0,
            aar_strength,
            alpha: DEFAULT_ALPHA,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters sufficient for null sampling and detection.
    pub fn null(scheme: Scheme, gamma: f64) -> Result<Self> {
        match scheme {
            Scheme::Kgw => Self::kgw(gamma, 1.0),
            Scheme::Aar => {
                let mut p = Self::aar(0.0)?;
                p.gamma = gamma;
                p.validate()?;
                Ok(p)
            }
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        match self.scheme {
            Scheme::Kgw => {
                if !(self.gamma1 > self.gamma && self.gamma1 <= 1.0) {
                    return Err(Error::invalid(format!(
                        "gamma1 must lie in (gamma, 1], got gamma={} gamma1={}",
                        self.gamma, self.gamma1
                    )));
                }
            }
            Scheme::Aar => {
                if !(self.aar_strength >= 0.0 && self.aar_strength.is_finite()) {
                    return Err(Error::invalid(format!(
                        "aar_strength must be finite and non-negative, got {}",
                        self.aar_strength
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Half-open token interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(usize, usize)", into = "(usize, usize)")]
pub struct SegmentSpan {
    pub start: usize,
    pub end: usize,
}

impl SegmentSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(Error::InvalidSpan { start, end, len: end });
        }
        Ok(SegmentSpan { start, end })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &SegmentSpan) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    pub fn check_within(&self, len: usize) -> Result<()> {
        if self.start >= self.end || self.end > len {
            return Err(Error::InvalidSpan { start: self.start, end: self.end, len });
        }
        Ok(())
    }
}

impl TryFrom<(usize, usize)> for SegmentSpan {
    type Error = Error;

    fn try_from((start, end): (usize, usize)) -> Result<Self> {
        SegmentSpan::new(start, end)
    }
}

impl From<SegmentSpan> for (usize, usize) {
    fn from(s: SegmentSpan) -> Self {
        (s.start, s.end)
    }
}

impl fmt::Display for SegmentSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Checks that every span lies in `[0, len)` and that no two overlap.
pub fn validate_disjoint(spans: &[SegmentSpan], len: usize) -> Result<()> {
    let mut sorted: Vec<SegmentSpan> = spans.to_vec();
    sorted.sort();
    for s in &sorted {
        s.check_within(len)?;
    }
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::OverlappingSpans(pair[0].start, pair[0].end, pair[1].start, pair[1].end));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreValues {
    /// KGW: `true` marks a green token.
    Green(Vec<bool>),
    /// Aar: `u_t(y_t)` in `[0, 1]`.
    Uniform(Vec<f64>),
}

impl ScoreValues {
    pub fn scheme(&self) -> Scheme {
        match self {
            ScoreValues::Green(_) => Scheme::Kgw,
            ScoreValues::Uniform(_) => Scheme::Aar,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ScoreValues::Green(v) => v.len(),
            ScoreValues::Uniform(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-token watermark evidence for one document. Never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    values: ScoreValues,
}

impl ScoreStream {
    pub fn kgw(flags: Vec<bool>) -> Result<Self> {
        Self::from_values(ScoreValues::Green(flags))
    }

    pub fn aar(values: Vec<f64>) -> Result<Self> {
        Self::from_values(ScoreValues::Uniform(values))
    }

    pub fn from_values(values: ScoreValues) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("score stream"));
        }
        if let ScoreValues::Uniform(v) = &values {
            if let Some((i, u)) = v.iter().enumerate().find(|(_, u)| !(0.0..=1.0).contains(*u)) {
                return Err(Error::invalid(format!("aar value {u} at position {i} is outside [0, 1]")));
            }
        }
        Ok(ScoreStream { values })
    }

    pub fn scheme(&self) -> Scheme {
        self.values.scheme()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &ScoreValues {
        &self.values
    }

    pub fn into_values(self) -> ScoreValues {
        self.values
    }

    pub fn green_flags(&self) -> Option<&[bool]> {
        match &self.values {
            ScoreValues::Green(v) => Some(v),
            ScoreValues::Uniform(_) => None,
        }
    }

    pub fn uniform_values(&self) -> Option<&[f64]> {
        match &self.values {
            ScoreValues::Uniform(v) => Some(v),
            ScoreValues::Green(_) => None,
        }
    }

    /// Additive per-token score: 0/1 for KGW, `log(1/(1-u))` for Aar.
    pub fn token_score(&self, i: usize) -> f64 {
        match &self.values {
            ScoreValues::Green(v) => f64::from(u8::from(v[i])),
            ScoreValues::Uniform(v) => aar_token_score(v[i]),
        }
    }

    pub fn green_count(&self) -> Option<usize> {
        self.green_flags().map(|v| v.iter().filter(|&&g| g).count())
    }
}

fn draw_null(params: &SchemeParams, n: usize, rng: &mut rng::Rng) -> ScoreValues {
    match params.scheme {
        Scheme::Kgw => ScoreValues::Green((0..n).map(|_| rng.random_bool(params.gamma)).collect()),
        Scheme::Aar => ScoreValues::Uniform((0..n).map(|_| rng.random::<f64>()).collect()),
    }
}

fn draw_watermarked(params: &SchemeParams, n: usize, rng: &mut rng::Rng) -> ScoreValues {
    match params.scheme {
        Scheme::Kgw => ScoreValues::Green((0..n).map(|_| rng.random_bool(params.gamma1)).collect()),
        Scheme::Aar => {
            // Inverse CDF of Beta(1 + s, 1): F(u) = u^(1+s).
            let inv = 1.0 / (1.0 + params.aar_strength);
            ScoreValues::Uniform((0..n).map(|_| rng.random::<f64>().powf(inv)).collect())
        }
    }
}

/// Null stream: Bernoulli(gamma) flags for KGW, Uniform[0, 1) values for Aar.
pub fn sample_null_stream(params: &SchemeParams, n: usize, seed: u64) -> Result<ScoreStream> {
    params.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput("null stream length"));
    }
    let mut rng = rng::seeded(seed);
    ScoreStream::from_values(draw_null(params, n, &mut rng))
}

/// Watermarked values: Bernoulli(gamma1) for KGW, Beta(1 + strength, 1) for Aar.
pub fn sample_watermarked_values(params: &SchemeParams, n: usize, seed: u64) -> Result<ScoreValues> {
    params.validate()?;
    if n == 0 {
        return Err(Error::EmptyInput("watermarked segment length"));
    }
    let mut rng = rng::seeded(seed);
    Ok(draw_watermarked(params, n, &mut rng))
}

/// Re-draws one value from the null distribution in place.
pub(crate) fn redraw_null(values: &mut ScoreValues, i: usize, gamma: f64, rng: &mut rng::Rng) {
    match values {
        ScoreValues::Green(v) => v[i] = rng.random_bool(gamma),
        ScoreValues::Uniform(v) => v[i] = rng.random::<f64>(),
    }
}

/// Replaces the values inside each span with fresh watermarked draws.
///
/// Segment `i` draws from a seed derived from `(seed, i)`, so its values do
/// not depend on the other segments.
pub fn embed_segments(
    null_stream: &ScoreStream,
    segments: &[(SegmentSpan, SchemeParams)],
    seed: u64,
) -> Result<ScoreStream> {
    let spans: Vec<SegmentSpan> = segments.iter().map(|(s, _)| *s).collect();
    validate_disjoint(&spans, null_stream.len())?;
    for (_, p) in segments {
        p.validate()?;
        if p.scheme != null_stream.scheme() {
            return Err(Error::SchemeMismatch {
                expected: null_stream.scheme().to_string(),
                found: p.scheme.to_string(),
            });
        }
    }

    let mut values = null_stream.values.clone();
    for (i, (span, params)) in segments.iter().enumerate() {
        let seg_seed = rng::derive_seed(rng::derive_seed(seed, labels::EMBED), i as u64);
        let mut rng = rng::seeded(seg_seed);
        match (&mut values, draw_watermarked(params, span.len(), &mut rng)) {
            (ScoreValues::Green(dst), ScoreValues::Green(src)) => dst[span.start..span.end].copy_from_slice(&src),
            (ScoreValues::Uniform(dst), ScoreValues::Uniform(src)) => {
                dst[span.start..span.end].copy_from_slice(&src)
            }
            _ => unreachable!("schemes checked above"),
        }
    }
    ScoreStream::from_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kgw(gamma: f64, gamma1: f64) -> SchemeParams {
        SchemeParams::kgw(gamma, gamma1).unwrap()
    }

    fn green_fraction(v: &ScoreValues) -> f64 {
        match v {
            ScoreValues::Green(f) => f.iter().filter(|&&g| g).count() as f64 / f.len() as f64,
            _ => panic!("expected kgw values"),
        }
    }

    #[test]
    fn params_invariants() {
        assert!(SchemeParams::kgw(0.5, 0.5).is_err());
        assert!(SchemeParams::kgw(0.5, 1.01).is_err());
        assert!(SchemeParams::kgw(1.0, 1.0).is_err());
        assert!(SchemeParams::kgw(0.5, 1.0).is_ok());
        assert!(kgw(0.5, 0.75).with_alpha(0.0).is_err());
        assert!(kgw(0.5, 0.75).with_alpha(1.0).is_err());
        assert!(SchemeParams::aar(-1.0).is_err());
    }

    #[test]
    fn span_serde_shape() {
        let s = SegmentSpan::new(3, 9).unwrap();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[3,9]");
        let back: SegmentSpan = serde_json::from_str("[3,9]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SegmentSpan>("[9,3]").is_err());
        assert!(serde_json::from_str::<SegmentSpan>("[4,4]").is_err());
    }

    #[test]
    fn null_stream_rejects_empty() {
        assert!(matches!(sample_null_stream(&kgw(0.5, 0.75), 0, 1), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn null_kgw_green_fraction() {
        let s = sample_null_stream(&kgw(0.5, 0.75), 10_000, 11).unwrap();
        let f = green_fraction(s.values());
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn near_degenerate_gamma() {
        let s = sample_null_stream(&kgw(0.999, 1.0), 1000, 3).unwrap();
        assert!(s.green_count().unwrap() >= 990);
    }

    #[test]
    fn null_aar_mean() {
        let s = sample_null_stream(&SchemeParams::aar(0.0).unwrap(), 100_000, 5).unwrap();
        let v = s.uniform_values().unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
        assert!(v.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn watermarked_kgw_rate() {
        let v = sample_watermarked_values(&kgw(0.5, 0.75), 10_000, 21).unwrap();
        assert!((green_fraction(&v) - 0.75).abs() < 0.02);
    }

    #[test]
    fn aar_strength_zero_is_null() {
        // Beta(1, 1) is the uniform: the inverse-CDF transform is the identity.
        let p = SchemeParams::aar(0.0).unwrap();
        let null = sample_null_stream(&p, 1000, 9).unwrap();
        let wm = sample_watermarked_values(&p, 1000, 9).unwrap();
        assert_eq!(null.values(), &wm);
    }

    #[test]
    fn aar_strength_two_log_mean() {
        // E[log 1/(1-U)] for U ~ Beta(3, 1) is the harmonic number H_3.
        let v = sample_watermarked_values(&SchemeParams::aar(2.0).unwrap(), 100_000, 17).unwrap();
        let ScoreValues::Uniform(v) = v else { panic!() };
        let mean = v.iter().map(|&u| aar_token_score(u)).sum::<f64>() / v.len() as f64;
        assert!((mean - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 0.02, "{mean}");
    }

    #[test]
    fn embed_empty_is_identity() {
        let s = sample_null_stream(&kgw(0.5, 0.75), 500, 1).unwrap();
        assert_eq!(embed_segments(&s, &[], 2).unwrap(), s);
    }

    #[test]
    fn embed_only_touches_spans() {
        let p = kgw(0.5, 0.75);
        let s = sample_null_stream(&p, 10_000, 4).unwrap();
        let span = SegmentSpan::new(4000, 4300).unwrap();
        let out = embed_segments(&s, &[(span, p)], 8).unwrap();
        let (a, b) = (s.green_flags().unwrap(), out.green_flags().unwrap());
        for i in (0..4000).chain(4300..10_000) {
            assert_eq!(a[i], b[i]);
        }
        let inside = b[4000..4300].iter().filter(|&&g| g).count();
        // Binomial(300, 0.75): sd = 7.5, so +-15 is two standard deviations.
        assert!((210..=240).contains(&inside), "{inside}");
    }

    #[test]
    fn embed_three_segments() {
        let p = kgw(0.5, 0.9);
        let s = sample_null_stream(&p, 6000, 4).unwrap();
        let spans = [(500, 900), (2500, 2900), (4500, 4900)].map(|(a, b)| SegmentSpan::new(a, b).unwrap());
        let segs: Vec<_> = spans.iter().map(|&sp| (sp, p)).collect();
        let out = embed_segments(&s, &segs, 8).unwrap();
        let g = out.green_flags().unwrap();
        let frac = |a: usize, b: usize| g[a..b].iter().filter(|&&x| x).count() as f64 / (b - a) as f64;
        for sp in spans {
            assert!(frac(sp.start, sp.end) > 0.8);
        }
        assert!((frac(1000, 2400) - 0.5).abs() < 0.06);
        assert!((frac(3000, 4400) - 0.5).abs() < 0.06);
    }

    #[test]
    fn embed_rejects_bad_spans() {
        let p = kgw(0.5, 0.75);
        let s = sample_null_stream(&p, 100, 1).unwrap();
        let a = SegmentSpan::new(10, 50).unwrap();
        let b = SegmentSpan::new(40, 60).unwrap();
        assert!(matches!(embed_segments(&s, &[(a, p), (b, p)], 0), Err(Error::OverlappingSpans(..))));
        let c = SegmentSpan::new(90, 101).unwrap();
        assert!(matches!(embed_segments(&s, &[(c, p)], 0), Err(Error::InvalidSpan { .. })));
        let aar = SchemeParams::aar(1.0).unwrap();
        assert!(matches!(embed_segments(&s, &[(a, aar)], 0), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn aar_stream_rejects_out_of_range() {
        assert!(ScoreStream::aar(vec![0.2, 1.5]).is_err());
        assert!(ScoreStream::aar(vec![]).is_err());
        assert!(ScoreStream::aar(vec![0.0, 1.0]).is_ok());
    }
}
